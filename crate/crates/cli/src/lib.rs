//! Experiment harness around `trpinn-core`.
//!
//! - [`config`]: TOML experiment description with field-path errors.
//! - [`train`]: Adam then L-BFGS with periodic error reports.
//! - [`ntk_cmd`]: kernel spectra per boundary sampling method.
//! - [`checks`]: closed-form semi-norm and oracle reproductions.
//! - [`output`]: CSV, checkpoint and SVG writers.

pub mod checks;
pub mod config;
pub mod error;
pub mod ntk_cmd;
pub mod output;
pub mod train;

pub use config::ExperimentConfig;
pub use error::CliError;
