//! Reference reproductions: the closed-form semi-norm of `|t|^{1/2}` and
//! the harmonic-extension oracle.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use trpinn_core::boundary_data::FourierSeries;
use trpinn_core::geometry::sample_interior;
use trpinn_core::quadrature::{seminorm_full, Domain, SeminormQuadSpec};

use crate::config::{ExperimentConfig, ProblemKind};
use crate::error::CliError;
use crate::output::{CsvWriter, Field};

pub const SEMINORM_GRIDS: [usize; 4] = [256, 512, 1024, 2048];

/// `12π ln 2 − 2π²`.
pub fn sqrt_abs_exact() -> f64 {
    12.0 * PI * 2f64.ln() - 2.0 * PI * PI
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeminormRow {
    pub case: &'static str,
    pub m: usize,
    pub value: f64,
    pub refined: f64,
    pub richardson: f64,
    pub exact: f64,
    /// Relative error of the extrapolated value; absolute when `exact` is 0.
    pub error: f64,
}

/// Quadrature of `|t|^{1/2}` on `[−π, π]` for each grid in
/// [`SEMINORM_GRIDS`], plus a constant function at the finest grid.
pub fn seminorm_rows() -> Result<Vec<SeminormRow>, CliError> {
    let exact = sqrt_abs_exact();
    let domain = Domain::interval(-PI, PI);
    let mut rows = Vec::new();
    let g0 = |t: f64| t.abs().sqrt();
    for m in SEMINORM_GRIDS {
        let q = seminorm_full(&g0, &SeminormQuadSpec::new(m, None, domain)?)?;
        rows.push(SeminormRow {
            case: "sqrt_abs",
            m,
            value: q.value,
            refined: q.refined,
            richardson: q.richardson,
            exact,
            error: (q.richardson - exact).abs() / exact,
        });
    }
    let m = SEMINORM_GRIDS[SEMINORM_GRIDS.len() - 1];
    let q = seminorm_full(&|_| 1.0, &SeminormQuadSpec::new(m, None, domain)?)?;
    rows.push(SeminormRow { case: "constant", m, value: q.value, refined: q.refined, richardson: q.richardson, exact: 0.0, error: q.richardson.abs() });
    Ok(rows)
}

pub fn run_seminorm_check(out_dir: &Path) -> Result<Vec<SeminormRow>, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let rows = seminorm_rows()?;
    let mut w = CsvWriter::create(&out_dir.join("seminorm_check.csv"), "seminorm_check", &["case", "m", "q_m", "q_2m", "richardson", "exact", "error"])?;
    for r in &rows {
        w.row(&[
            Field::Str(r.case),
            Field::Int(r.m as u128),
            Field::Float(r.value),
            Field::Float(r.refined),
            Field::Float(r.richardson),
            Field::Float(r.exact),
            Field::Float(r.error),
        ])?;
    }
    w.finish()?;
    Ok(rows)
}

/// Fourth-order Laplacian estimate `(4 L(h) − L(2h)) / 3` from 5-point
/// stencils.
pub fn fd_laplacian(u: &dyn Fn([f64; 2]) -> f64, x: [f64; 2], h: f64) -> f64 {
    let five = |h: f64| {
        (u([x[0] + h, x[1]]) + u([x[0] - h, x[1]]) + u([x[0], x[1] + h]) + u([x[0], x[1] - h]) - 4.0 * u(x)) / (h * h)
    };
    (4.0 * five(h) - five(2.0 * h)) / 3.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheck {
    /// Max error against `r^V sin(Vθ)` on a 100×100 polar grid (sin data
    /// only).
    pub closed_form_error: Option<f64>,
    /// Max |finite-difference Laplacian| at 50 random interior points.
    pub max_fd_laplacian: f64,
    /// Max boundary reconstruction error on a 10,001-point grid.
    pub boundary_error: f64,
}

pub fn oracle_check(config: &ExperimentConfig) -> Result<OracleCheck, CliError> {
    config.validate()?;
    let p = &config.problem;
    let g = p.boundary_function();
    let oracle = FourierSeries::fit(&g, p.oracle_samples, p.oracle_modes)?;
    let closed_form_error = match p.kind {
        ProblemKind::Sin => {
            let v = p.v as f64;
            let mut worst = 0.0f64;
            for i in 1..=100 {
                let r = i as f64 / 100.0;
                for j in 0..100 {
                    let t = TAU * j as f64 / 100.0;
                    let u = oracle.eval([r * t.cos(), r * t.sin()])?.u;
                    worst = worst.max((u - r.powf(v) * (v * t).sin()).abs());
                }
            }
            Some(worst)
        }
        ProblemKind::Sharp => None,
    };
    let u = |x: [f64; 2]| oracle.eval(x).expect("stencil stays inside the disk").u;
    let pts = sample_interior(50, config.sampling.interior_seed)?.points;
    let max_fd_laplacian = pts
        .iter()
        .map(|&x| {
            // keep the stencil inside the unit disk
            let s = 0.9 / (x[0].hypot(x[1])).max(0.9);
            fd_laplacian(&u, [x[0] * s, x[1] * s], 1e-3).abs()
        })
        .fold(0.0, f64::max);
    let boundary_error = oracle.max_boundary_error(&g, 10_001);
    Ok(OracleCheck { closed_form_error, max_fd_laplacian, boundary_error })
}

pub fn run_oracle_check(config: &ExperimentConfig, out_dir: &Path) -> Result<OracleCheck, CliError> {
    let check = oracle_check(config)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut w = CsvWriter::create(&out_dir.join("oracle_check.csv"), "oracle_check", &["quantity", "value"])?;
    if let Some(e) = check.closed_form_error {
        w.row(&[Field::Str("max_error_vs_closed_form"), Field::Float(e)])?;
    }
    w.row(&[Field::Str("max_fd_laplacian"), Field::Float(check.max_fd_laplacian)])?;
    w.row(&[Field::Str("max_boundary_reconstruction_error"), Field::Float(check.boundary_error)])?;
    w.finish()?;
    Ok(check)
}
