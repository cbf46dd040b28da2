//! Adam followed by L-BFGS on fixed samples, with periodic error reports
//! and the best-H¹ checkpoint.

use std::path::{Path, PathBuf};
use std::time::Instant;

use trpinn_core::boundary_data::{BoundaryFunction, FourierSeries};
use trpinn_core::geometry::{sample_boundary, sample_interior};
use trpinn_core::losses::{laplace_source, LossProblem};
use trpinn_core::metrics::{ErrorEvaluator, ErrorReport};
use trpinn_core::model::Mlp;
use trpinn_core::optimize::{adam_step, lbfgs_minimize, norm2, AdamState, Termination};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{fmt_f64, write_checkpoint, CsvWriter, Field, SvgPlot};

pub const METRICS_COLUMNS: [&str; 7] = ["phase", "iteration", "loss", "rel_h1_in", "rel_l2_in", "rel_hhalf_bd", "rel_l2_bd"];
pub const TRACE_COLUMNS: [&str; 5] = ["phase", "iteration", "loss", "grad_norm", "wall_ms"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Adam,
    Lbfgs,
    Final,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Adam => "adam",
            Self::Lbfgs => "lbfgs",
            Self::Final => "final",
        }
    }
}

/// One row of `metrics.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub phase: Phase,
    pub iteration: usize,
    pub loss: f64,
    pub report: ErrorReport,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// Row with the lowest relative H¹ error.
    pub best: MetricsRow,
    pub rows: Vec<MetricsRow>,
    pub adam_ms: u128,
    pub lbfgs_ms: u128,
    pub termination: Option<Termination>,
    pub lbfgs_iterations: usize,
    pub oracle_boundary_error: f64,
}

struct Recorder<'a> {
    evaluator: &'a ErrorEvaluator,
    scratch: Mlp,
    metrics: CsvWriter,
    rows: Vec<MetricsRow>,
    best: Option<(MetricsRow, Vec<f64>)>,
}

impl Recorder<'_> {
    fn record(&mut self, phase: Phase, iteration: usize, loss: f64, params: &[f64]) -> Result<(), CliError> {
        self.scratch.set_params(params)?;
        let report = self.evaluator.evaluate(&self.scratch);
        let row = MetricsRow { phase, iteration, loss, report };
        self.metrics.row(&[
            Field::Str(phase.as_str()),
            Field::Int(iteration as u128),
            Field::Float(loss),
            Field::Float(report.rel_h1_inside),
            Field::Float(report.rel_l2_inside),
            Field::Float(report.rel_hhalf_boundary),
            Field::Float(report.rel_l2_boundary),
        ])?;
        let better = match &self.best {
            None => true,
            Some((b, _)) => report.rel_h1_inside < b.report.rel_h1_inside,
        };
        if better {
            self.best = Some((row, params.to_vec()));
        }
        self.rows.push(row);
        Ok(())
    }
}

fn trace_row(trace: &mut CsvWriter, phase: Phase, iteration: usize, loss: f64, grad_norm: f64, start: Instant) -> Result<(), CliError> {
    trace.row(&[
        Field::Str(phase.as_str()),
        Field::Int(iteration as u128),
        Field::Float(loss),
        Field::Float(grad_norm),
        Field::Int(start.elapsed().as_millis()),
    ])
}

fn mark_failed(dir: &Path, err: &CliError) {
    let _ = std::fs::write(dir.join("status.txt"), format!("failed: {err}\n"));
}

/// Runs training and writes `metrics.csv`, `trace.csv`,
/// `boundary_prediction.csv`, `best.ckpt`, `final.ckpt`, `summary.csv`,
/// `status.txt` and the resolved `config.toml` into `out_dir`.
pub fn run_train(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, CliError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut resolved = config.clone();
    resolved.output.dir = out_dir.display().to_string();
    let cfg_path = out_dir.join("config.toml");
    std::fs::write(&cfg_path, resolved.to_toml()).map_err(|e| CliError::io(&cfg_path, e))?;
    let result = train_inner(&resolved, out_dir);
    match &result {
        Ok(_) => {
            let p = out_dir.join("status.txt");
            std::fs::write(&p, "ok\n").map_err(|e| CliError::io(&p, e))?;
        }
        Err(e) => mark_failed(out_dir, e),
    }
    result
}

fn train_inner(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary, CliError> {
    let g = cfg.problem.boundary_function();
    let oracle = FourierSeries::fit(&g, cfg.problem.oracle_samples, cfg.problem.oracle_modes)?;
    let oracle_boundary_error = oracle.max_boundary_error(&g, 10_001);
    let evaluator = ErrorEvaluator::from_oracle(cfg.metrics.grids(), &oracle)?;
    let interior = sample_interior(cfg.sampling.interior_n, cfg.sampling.interior_seed)?;
    let boundary = sample_boundary(cfg.sampling.boundary_method, cfg.sampling.boundary_n, cfg.sampling.boundary_seed)?;
    let f = laplace_source();
    let problem = LossProblem::new(&interior, &boundary, &g, &f, cfg.loss_weights()?)?;
    let mut net = Mlp::init(&cfg.model.layer_sizes(), cfg.model.seed)?;
    let cadence = cfg.metrics.cadence;

    let mut rec = Recorder {
        evaluator: &evaluator,
        scratch: net.clone(),
        metrics: CsvWriter::create(&dir.join("metrics.csv"), "metrics", &METRICS_COLUMNS)?,
        rows: Vec::new(),
        best: None,
    };
    let mut trace = CsvWriter::create(&dir.join("trace.csv"), "trace", &TRACE_COLUMNS)?;

    // Adam
    let start = Instant::now();
    let iters = cfg.adam.iterations;
    let mut state = AdamState::new(net.num_params(), cfg.adam.to_core())?;
    let mut grad = vec![0.0; net.num_params()];
    let mut last_loss = f64::NAN;
    for it in 0..=iters {
        let loss = problem.value_and_grad(&net, &mut grad).total;
        if !loss.is_finite() {
            return Err(CliError::Numerical { phase: "adam", iteration: it, message: format!("loss is {loss}") });
        }
        last_loss = loss;
        trace_row(&mut trace, Phase::Adam, it, loss, norm2(&grad), start)?;
        if it % cadence == 0 || it == iters {
            rec.record(Phase::Adam, it, loss, net.params())?;
        }
        if it == iters {
            break;
        }
        adam_step(net.params_mut(), &grad, &mut state)
            .map_err(|e| CliError::Numerical { phase: "adam", iteration: it, message: e.to_string() })?;
    }
    let adam_ms = start.elapsed().as_millis();

    // L-BFGS
    let start = Instant::now();
    let mut termination = None;
    let mut lbfgs_iterations = 0;
    if cfg.lbfgs.max_iters > 0 {
        let mut work = net.clone();
        let objective = |x: &[f64], g: &mut [f64]| -> f64 {
            work.set_params(x).expect("parameter count is fixed");
            problem.value_and_grad(&work, g).total
        };
        let mut pending: Result<(), CliError> = Ok(());
        let on_step = |step: &trpinn_core::optimize::LbfgsStep, x: &[f64]| {
            if pending.is_err() {
                return;
            }
            pending = trace_row(&mut trace, Phase::Lbfgs, step.iteration, step.loss, step.grad_norm, start)
                .and_then(|_| if step.iteration % cadence == 0 { rec.record(Phase::Lbfgs, step.iteration, step.loss, x) } else { Ok(()) });
        };
        let result = lbfgs_minimize(objective, net.flatten(), &cfg.lbfgs.to_core(), on_step)
            .map_err(|e| CliError::Numerical { phase: "lbfgs", iteration: 0, message: e.to_string() })?;
        pending?;
        net.set_params(&result.params)?;
        last_loss = result.loss;
        termination = Some(result.termination);
        lbfgs_iterations = result.iterations;
        rec.record(Phase::Final, result.iterations, result.loss, net.params())?;
    }
    let lbfgs_ms = start.elapsed().as_millis();
    trace.finish()?;
    let Recorder { metrics, rows, best, .. } = rec;
    metrics.finish()?;
    let (best, best_params) = best.expect("at least one report is recorded");

    let best_net = Mlp::from_flat(net.layer_sizes(), best_params)?;
    write_checkpoint(&dir.join("best.ckpt"), &best_net)?;
    write_checkpoint(&dir.join("final.ckpt"), &net)?;
    let prediction = boundary_prediction(&best_net, &g, cfg.metrics.prediction_points);
    let mut w = CsvWriter::create(&dir.join("boundary_prediction.csv"), "boundary_prediction", &["theta", "u_nn", "g"])?;
    for &(t, u, gv) in &prediction {
        w.row(&[Field::Float(t), Field::Float(u), Field::Float(gv)])?;
    }
    w.finish()?;

    let summary = RunSummary {
        out_dir: dir.to_path_buf(),
        best,
        rows,
        adam_ms,
        lbfgs_ms,
        termination,
        lbfgs_iterations,
        oracle_boundary_error,
    };
    write_summary(&summary, last_loss, &dir.join("summary.csv"))?;
    if cfg.output.svg {
        write_plots(&summary, &prediction, dir)?;
    }
    Ok(summary)
}

/// `(θ, u_NN(cos θ, sin θ), g(θ))` on `θ = 2πj/n`.
pub fn boundary_prediction(net: &Mlp, g: &BoundaryFunction, n: usize) -> Vec<(f64, f64, f64)> {
    (0..n)
        .map(|j| {
            let t = std::f64::consts::TAU * j as f64 / n as f64;
            (t, net.forward([t.cos(), t.sin()]), g.eval(t))
        })
        .collect()
}

fn write_summary(s: &RunSummary, final_loss: f64, path: &Path) -> Result<(), CliError> {
    let mut w = CsvWriter::create(path, "summary", &["key", "value"])?;
    let b = &s.best;
    let term = s.termination.map_or("skipped", |t| t.as_str());
    let rows: [(&str, String); 14] = [
        ("best_phase", b.phase.as_str().into()),
        ("best_iteration", b.iteration.to_string()),
        ("best_loss", fmt_f64(b.loss)),
        ("best_rel_h1_in", fmt_f64(b.report.rel_h1_inside)),
        ("best_rel_l2_in", fmt_f64(b.report.rel_l2_inside)),
        ("best_rel_hhalf_bd", fmt_f64(b.report.rel_hhalf_boundary)),
        ("best_rel_l2_bd", fmt_f64(b.report.rel_l2_boundary)),
        ("final_loss", fmt_f64(final_loss)),
        ("lbfgs_termination", term.into()),
        ("lbfgs_iterations", s.lbfgs_iterations.to_string()),
        ("oracle_max_boundary_error", fmt_f64(s.oracle_boundary_error)),
        ("adam_ms", s.adam_ms.to_string()),
        ("lbfgs_ms", s.lbfgs_ms.to_string()),
        ("wall_clock_note", "hardware dependent".into()),
    ];
    for (k, v) in &rows {
        w.row(&[Field::Str(k), Field::Str(v)])?;
    }
    w.finish()
}

fn write_plots(s: &RunSummary, prediction: &[(f64, f64, f64)], dir: &Path) -> Result<(), CliError> {
    SvgPlot {
        title: "boundary trace",
        x_label: "θ",
        y_label: "u",
        series: vec![
            ("u_NN", prediction.iter().map(|p| (p.0, p.1)).collect()),
            ("g", prediction.iter().map(|p| (p.0, p.2)).collect()),
        ],
    }
    .write(&dir.join("boundary_prediction.svg"))?;
    let log = |v: f64| v.log10();
    let idx = |k: usize| k as f64;
    let rows = &s.rows;
    SvgPlot {
        title: "relative errors",
        x_label: "evaluation",
        y_label: "log10 relative error",
        series: vec![
            ("H¹ inside", rows.iter().enumerate().map(|(k, r)| (idx(k), log(r.report.rel_h1_inside))).collect()),
            ("L² inside", rows.iter().enumerate().map(|(k, r)| (idx(k), log(r.report.rel_l2_inside))).collect()),
            ("H^1/2 boundary", rows.iter().enumerate().map(|(k, r)| (idx(k), log(r.report.rel_hhalf_boundary))).collect()),
            ("L² boundary", rows.iter().enumerate().map(|(k, r)| (idx(k), log(r.report.rel_l2_boundary))).collect()),
        ],
    }
    .write(&dir.join("metrics.svg"))
}
