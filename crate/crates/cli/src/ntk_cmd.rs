//! NTK spectra of the boundary kernel at initialisation, per sampling
//! method.

use std::path::Path;

use trpinn_core::geometry::{sample_boundary, BoundaryMethod};
use trpinn_core::linalg::Matrix;
use trpinn_core::model::Mlp;
use trpinn_core::ntk::{boundary_jacobian, spectrum_compare, Spectra};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{CsvWriter, Field};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NtkOptions {
    /// Defaults to `min(100, N_b)`.
    pub top_k: Option<usize>,
    pub skip_pairs: bool,
    /// Replace `K_bb` by the identity.
    pub identity_kernel: bool,
}

impl Default for NtkOptions {
    fn default() -> Self {
        Self { top_k: None, skip_pairs: false, identity_kernel: false }
    }
}

/// `K_bb = J_b J_bᵀ` for the configured network and boundary samples.
pub fn boundary_kernel(config: &ExperimentConfig, method: BoundaryMethod) -> Result<Matrix, CliError> {
    let boundary = sample_boundary(method, config.sampling.boundary_n, config.sampling.boundary_seed)?;
    let net = Mlp::init(&config.model.layer_sizes(), config.model.seed)?;
    Ok(boundary_jacobian(&net, &boundary.points).gram())
}

/// Writes `ntk_<method>.csv` with columns `index, lambda_p, lambda_h, diff`
/// for each sampling method, plus the resolved config.
pub fn run_ntk(config: &ExperimentConfig, out_dir: &Path, opts: NtkOptions) -> Result<Vec<(BoundaryMethod, Spectra)>, CliError> {
    config.validate()?;
    let n = config.sampling.boundary_n;
    let top_k = opts.top_k.unwrap_or(100.min(n));
    if top_k == 0 || top_k > n {
        return Err(CliError::Config { path: "--top-k".into(), message: format!("must lie in 1..={n}, got {top_k}") });
    }
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut resolved = config.clone();
    resolved.output.dir = out_dir.display().to_string();
    let cfg_path = out_dir.join("config.toml");
    std::fs::write(&cfg_path, resolved.to_toml()).map_err(|e| CliError::io(&cfg_path, e))?;

    let mut out = Vec::new();
    for method in BoundaryMethod::ALL {
        let kbb = if opts.identity_kernel { Matrix::identity(n) } else { boundary_kernel(config, method)? };
        let spectra = spectrum_compare(&kbb, top_k, opts.skip_pairs)?;
        let mut w = CsvWriter::create(&out_dir.join(format!("ntk_{}.csv", method.as_str())), "ntk", &["index", "lambda_p", "lambda_h", "diff"])?;
        for (i, ((p, h), d)) in spectra.lambda_p.iter().zip(&spectra.lambda_h).zip(spectra.diff()).enumerate() {
            w.row(&[Field::Int(i as u128), Field::Float(*p), Field::Float(*h), Field::Float(d)])?;
        }
        w.finish()?;
        out.push((method, spectra));
    }
    Ok(out)
}
