//! Experiment configuration in TOML.
//!
//! Every section is optional and falls back to the defaults below, which
//! describe the desk-scale `sin(10θ)` run with the semi-norm term on.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use trpinn_core::boundary_data::BoundaryFunction;
use trpinn_core::geometry::BoundaryMethod;
use trpinn_core::losses::LossWeights;
use trpinn_core::metrics::EvalGrids;
use trpinn_core::optimize::{AdamConfig, LbfgsConfig};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Sin,
    Sharp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub v: u32,
    pub oracle_samples: usize,
    pub oracle_modes: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self { kind: ProblemKind::Sin, v: 10, oracle_samples: 4096, oracle_modes: 1024 }
    }
}

impl ProblemConfig {
    pub fn boundary_function(&self) -> BoundaryFunction {
        match self.kind {
            ProblemKind::Sin => BoundaryFunction::Sin { v: self.v },
            ProblemKind::Sharp => BoundaryFunction::Sharp { v: self.v },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 50.0, gamma: 50.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub units: usize,
    pub hidden_layers: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { units: 32, hidden_layers: 3, seed: 0 }
    }
}

impl ModelConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![2];
        sizes.extend(std::iter::repeat(self.units).take(self.hidden_layers));
        sizes.push(1);
        sizes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub interior_n: usize,
    pub interior_seed: u64,
    #[serde(serialize_with = "ser_method", deserialize_with = "de_method")]
    pub boundary_method: BoundaryMethod,
    pub boundary_n: usize,
    pub boundary_seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            interior_n: 2000,
            interior_seed: 1,
            boundary_method: BoundaryMethod::Randomized,
            boundary_n: 201,
            boundary_seed: 2,
        }
    }
}

fn ser_method<S: Serializer>(m: &BoundaryMethod, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(m.as_str())
}

fn de_method<'de, D: Deserializer<'de>>(d: D) -> Result<BoundaryMethod, D::Error> {
    let s = String::deserialize(d)?;
    BoundaryMethod::from_str(&s).map_err(serde::de::Error::custom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamSection {
    pub iterations: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSection {
    fn default() -> Self {
        let d = AdamConfig::default();
        Self { iterations: 5000, lr: d.lr, beta1: d.beta1, beta2: d.beta2, eps: d.eps }
    }
}

impl AdamSection {
    pub fn to_core(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsSection {
    pub max_iters: usize,
    pub history: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
    pub grad_tol: f64,
    pub rel_decrease_tol: f64,
    pub window: usize,
}

impl Default for LbfgsSection {
    fn default() -> Self {
        let d = LbfgsConfig::default();
        Self {
            max_iters: d.max_iters,
            history: d.history,
            c1: d.c1,
            c2: d.c2,
            max_line_search: d.max_line_search,
            grad_tol: d.grad_tol,
            rel_decrease_tol: d.rel_decrease_tol,
            window: d.window,
        }
    }
}

impl LbfgsSection {
    pub fn to_core(&self) -> LbfgsConfig {
        LbfgsConfig {
            history: self.history,
            c1: self.c1,
            c2: self.c2,
            max_iters: self.max_iters,
            max_line_search: self.max_line_search,
            grad_tol: self.grad_tol,
            rel_decrease_tol: self.rel_decrease_tol,
            window: self.window,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Evaluate the error report every `cadence` iterations of each phase.
    pub cadence: usize,
    pub radial: usize,
    pub angular: usize,
    pub boundary: usize,
    /// Points of the uniform angle grid in `boundary_prediction.csv`.
    pub prediction_points: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let g = EvalGrids::default();
        Self { cadence: 100, radial: g.radial, angular: g.angular, boundary: g.boundary, prediction_points: 2048 }
    }
}

impl MetricsSection {
    pub fn grids(&self) -> EvalGrids {
        EvalGrids { radial: self.radial, angular: self.angular, boundary: self.boundary }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Also render SVG plots next to the CSVs.
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "runs/default".into(), svg: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub weights: WeightsConfig,
    pub model: ModelConfig,
    pub sampling: SamplingConfig,
    pub adam: AdamSection,
    pub lbfgs: LbfgsSection,
    pub metrics: MetricsSection,
    pub output: OutputSection,
}

fn invalid(path: &str, message: impl fmt::Display) -> CliError {
    CliError::Config { path: path.into(), message: message.to_string() }
}

fn positive(path: &str, value: usize) -> Result<(), CliError> {
    if value == 0 {
        return Err(invalid(path, "must be positive"));
    }
    Ok(())
}

fn seed(path: &str, value: u64) -> Result<(), CliError> {
    if value > i64::MAX as u64 {
        return Err(invalid(path, "must fit a TOML integer (at most 2^63 - 1)"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Parse(e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(&path, e.into_inner().message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all representable in TOML")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Seeds `n`, `n + 1`, `n + 2` for the network, interior and boundary.
    pub fn override_seeds(&mut self, n: u64) {
        self.model.seed = n;
        self.sampling.interior_seed = n.wrapping_add(1);
        self.sampling.boundary_seed = n.wrapping_add(2);
    }

    pub fn loss_weights(&self) -> Result<LossWeights, CliError> {
        let w = &self.weights;
        LossWeights::new(w.alpha, w.beta, w.gamma).map_err(|e| invalid("weights", e))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.problem;
        positive("problem.v", p.v as usize)?;
        positive("problem.oracle_modes", p.oracle_modes)?;
        if p.oracle_samples < 2 * p.oracle_modes + 1 {
            return Err(invalid("problem.oracle_samples", "must be at least 2 * oracle_modes + 1"));
        }
        if p.oracle_modes <= p.v as usize && p.kind == ProblemKind::Sin {
            return Err(invalid("problem.oracle_modes", "must exceed v"));
        }
        self.loss_weights()?;
        positive("model.units", self.model.units)?;
        positive("model.hidden_layers", self.model.hidden_layers)?;
        seed("model.seed", self.model.seed)?;
        let s = &self.sampling;
        positive("sampling.interior_n", s.interior_n)?;
        if s.boundary_n < 3 {
            return Err(invalid("sampling.boundary_n", "needs at least 3 points"));
        }
        seed("sampling.interior_seed", s.interior_seed)?;
        seed("sampling.boundary_seed", s.boundary_seed)?;
        self.adam.to_core().validate().map_err(|e| invalid("adam", e))?;
        self.lbfgs.to_core().validate().map_err(|e| invalid("lbfgs", e))?;
        let m = &self.metrics;
        positive("metrics.cadence", m.cadence)?;
        m.grids().validate().map_err(|e| invalid("metrics", e))?;
        positive("metrics.prediction_points", m.prediction_points)?;
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }
}
