use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trpinn_cli::checks::{run_oracle_check, run_seminorm_check};
use trpinn_cli::ntk_cmd::{run_ntk, NtkOptions};
use trpinn_cli::train::run_train;
use trpinn_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "trpinn", version, about = "Trace-regularity PINN experiments on the unit disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and write metrics, traces, predictions and checkpoints.
    Train(Common),
    /// Compare PINN and TRPINN boundary kernel spectra at initialisation.
    Ntk {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        top_k: Option<usize>,
        /// Include the second-neighbour pairs in the dynamics matrix.
        #[arg(long)]
        with_skip_pairs: bool,
        /// Use the identity as boundary kernel.
        #[arg(long)]
        identity_kernel: bool,
    },
    /// Reproduce the closed-form semi-norm of |t|^(1/2).
    SeminormCheck {
        #[arg(long, default_value = "runs/seminorm_check")]
        out_dir: PathBuf,
    },
    /// Check the harmonic-extension oracle of the configured boundary data.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Sets the network, interior and boundary seeds to N, N+1, N+2.
    #[arg(long, value_name = "N")]
    seed_override: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf), CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(n) = self.seed_override {
            cfg.override_seeds(n);
        }
        if let Some(d) = &self.out_dir {
            cfg.output.dir = d.display().to_string();
        }
        cfg.validate()?;
        let dir = PathBuf::from(&cfg.output.dir);
        Ok((cfg, dir))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(common) => {
            let (cfg, dir) = common.resolve()?;
            let s = run_train(&cfg, &dir)?;
            let b = &s.best.report;
            println!(
                "best ({} {}): rel H1 in {:e}, L2 in {:e}, H1/2 bd {:e}, L2 bd {:e}",
                s.best.phase.as_str(),
                s.best.iteration,
                b.rel_h1_inside,
                b.rel_l2_inside,
                b.rel_hhalf_boundary,
                b.rel_l2_boundary
            );
            println!("adam {} ms, lbfgs {} ms; outputs in {}", s.adam_ms, s.lbfgs_ms, dir.display());
        }
        Command::Ntk { common, top_k, with_skip_pairs, identity_kernel } => {
            let (cfg, dir) = common.resolve()?;
            let opts = NtkOptions { top_k, skip_pairs: with_skip_pairs, identity_kernel };
            for (method, spectra) in run_ntk(&cfg, &dir, opts)? {
                let min_diff = spectra.diff().into_iter().fold(f64::INFINITY, f64::min);
                println!("{method}: top λ_p {:e}, top λ_h {:e}, min diff {:e}", spectra.lambda_p[0], spectra.lambda_h[0], min_diff);
            }
        }
        Command::SeminormCheck { out_dir } => {
            for r in run_seminorm_check(&out_dir)? {
                println!("{:>9} m={:<5} richardson {:.6} error {:e}", r.case, r.m, r.richardson, r.error);
            }
        }
        Command::OracleCheck(common) => {
            let (cfg, dir) = common.resolve()?;
            let c = run_oracle_check(&cfg, &dir)?;
            if let Some(e) = c.closed_form_error {
                println!("max error vs closed form: {e:e}");
            }
            println!("max |FD Laplacian|: {:e}", c.max_fd_laplacian);
            println!("max boundary reconstruction error: {:e}", c.boundary_error);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
