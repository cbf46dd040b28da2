//! Adam and L-BFGS over a flat parameter vector.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            bail!(Config, "Adam learning rate must be positive, got {}", self.lr);
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            bail!(Config, "Adam betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2);
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            bail!(Config, "Adam epsilon must be positive, got {}", self.eps);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, m: vec![0.0; n], v: vec![0.0; n], t: 0 })
    }
}

/// One bias-corrected Adam update. A non-finite gradient leaves both
/// `params` and `state` untouched.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grad.len() || params.len() != state.m.len() {
        bail!(Structural, "Adam: {} params, {} gradients, {} moments", params.len(), grad.len(), state.m.len());
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        bail!(NonFinite, "gradient component {i} is {}", grad[i]);
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.t += 1;
    let bc1 = 1.0 - math::powi(beta1, state.t as i32);
    let bc2 = 1.0 - math::powi(beta2, state.t as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * (g * g);
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (math::sqrt(v_hat) + eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsConfig {
    /// Number of stored curvature pairs.
    pub history: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_iters: usize,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
    /// Stop when `‖g‖_∞` falls below this.
    pub grad_tol: f64,
    /// Stop when the relative loss decrease over `window` iterations falls
    /// below this.
    pub rel_decrease_tol: f64,
    pub window: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            history: 10,
            c1: 1e-4,
            c2: 0.9,
            max_iters: 500,
            max_line_search: 25,
            grad_tol: 1e-9,
            rel_decrease_tol: 1e-12,
            window: 10,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.history == 0 {
            bail!(Config, "L-BFGS history must be at least 1");
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            bail!(Config, "line search needs 0 < c1 < c2 < 1, got c1 = {}, c2 = {}", self.c1, self.c2);
        }
        if self.max_line_search == 0 || self.window == 0 {
            bail!(Config, "line-search budget and decrease window must be positive");
        }
        if !(self.grad_tol >= 0.0) || !(self.rel_decrease_tol >= 0.0) {
            bail!(Config, "termination thresholds must be nonnegative");
        }
        Ok(())
    }
}

/// Why L-BFGS stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    RelativeDecrease,
    LineSearchFailed,
    MaxIterations,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::GradientTolerance => "gradient_tolerance",
            Self::RelativeDecrease => "relative_decrease",
            Self::LineSearchFailed => "line_search_failed",
            Self::MaxIterations => "max_iterations",
        }
    }
}

/// Curvature pairs `(s, y)` with `ρ = 1 / sᵀy`, oldest first.
#[derive(Clone, Debug, Default)]
pub struct LbfgsHistory {
    capacity: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl LbfgsHistory {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, pairs: VecDeque::with_capacity(capacity) }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Admits the pair only if `sᵀy > 0`; returns whether it was admitted.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > 0.0 && sy.is_finite()) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    /// Two-loop recursion: `−H g` with `H₀ = (sᵀy / yᵀy) I` from the newest
    /// pair.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = vec![0.0; self.pairs.len()];
        for (k, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            let a = rho * dot(s, &q);
            alphas[k] = a;
            axpy(-a, y, &mut q);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for (k, (s, y, rho)) in self.pairs.iter().enumerate() {
            let b = rho * dot(y, &q);
            axpy(alphas[k] - b, s, &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

/// One accepted L-BFGS iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsStep {
    pub iteration: usize,
    pub loss: f64,
    /// Euclidean norm of the gradient at the new point.
    pub grad_norm: f64,
    pub step: f64,
    pub evaluations: usize,
    pub armijo: bool,
    pub curvature: bool,
    pub pair_admitted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsResult {
    /// Best parameters seen.
    pub params: Vec<f64>,
    pub loss: f64,
    pub termination: Termination,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Minimises `f`, which writes the gradient into its second argument and
/// returns the loss. `on_step` runs after every accepted step with the new
/// parameters.
pub fn lbfgs_minimize<F, C>(mut f: F, x0: Vec<f64>, config: &LbfgsConfig, mut on_step: C) -> Result<LbfgsResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    C: FnMut(&LbfgsStep, &[f64]),
{
    config.validate()?;
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        bail!(NonFinite, "loss or gradient at the starting point is not finite");
    }
    let mut best = (fx, x.clone());
    let mut history = LbfgsHistory::new(config.history);
    let mut losses = vec![fx];
    let mut iterations = 0;

    let termination = loop {
        if norm_inf(&g) < config.grad_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= config.max_iters {
            break Termination::MaxIterations;
        }
        let mut d = history.direction(&g);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let alpha0 = if history.is_empty() { 1.0f64.min(1.0 / norm2(&g)) } else { 1.0 };

        let ls = line_search(&mut f, &x, fx, slope, &d, alpha0, config);
        evaluations += ls.evaluations;
        let Some(acc) = ls.accepted else {
            break Termination::LineSearchFailed;
        };
        iterations += 1;
        let s: Vec<f64> = acc.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = acc.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let armijo = acc.fx <= fx + config.c1 * acc.alpha * slope;
        let curvature = math::abs(dot(&acc.g, &d)) <= config.c2 * math::abs(slope);
        let admitted = history.push(s, y);
        x = acc.x;
        g = acc.g;
        fx = acc.fx;
        if fx < best.0 {
            best = (fx, x.clone());
        }
        losses.push(fx);
        on_step(
            &LbfgsStep {
                iteration: iterations,
                loss: fx,
                grad_norm: norm2(&g),
                step: acc.alpha,
                evaluations: ls.evaluations,
                armijo,
                curvature,
                pair_admitted: admitted,
            },
            &x,
        );
        if losses.len() > config.window {
            let old = losses[losses.len() - 1 - config.window];
            let rel = (old - fx) / math::abs(old).max(f64::MIN_POSITIVE);
            if rel < config.rel_decrease_tol {
                break Termination::RelativeDecrease;
            }
        }
    };
    Ok(LbfgsResult { params: best.1, loss: best.0, termination, iterations, evaluations })
}

struct Accepted {
    alpha: f64,
    x: Vec<f64>,
    fx: f64,
    g: Vec<f64>,
}

struct LineSearch {
    accepted: Option<Accepted>,
    evaluations: usize,
}

/// Strong-Wolfe line search: bracketing by doubling, then zoom with
/// safeguarded cubic interpolation. Non-finite trial values are treated as
/// too long a step.
fn line_search<F>(f: &mut F, x: &[f64], f0: f64, slope0: f64, d: &[f64], alpha0: f64, cfg: &LbfgsConfig) -> LineSearch
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut evals = 0;
    let mut trial = |alpha: f64, evals: &mut usize| {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let mut gt = vec![0.0; x.len()];
        let ft = f(&xt, &mut gt);
        *evals += 1;
        let finite = ft.is_finite() && gt.iter().all(|v| v.is_finite());
        let slope = dot(&gt, d);
        (Accepted { alpha, x: xt, fx: ft, g: gt }, slope, finite)
    };
    let armijo = |a: &Accepted| a.fx <= f0 + cfg.c1 * a.alpha * slope0;
    let strong_curv = |s: f64| math::abs(s) <= -cfg.c2 * slope0;

    // (alpha, value, slope) of the bracket ends
    let mut prev = (0.0, f0, slope0);
    let mut alpha = alpha0;
    let mut bracket = None;
    while evals < cfg.max_line_search {
        let (t, s, finite) = trial(alpha, &mut evals);
        if !finite {
            alpha = prev.0 + 0.5 * (alpha - prev.0);
            continue;
        }
        if !armijo(&t) || (prev.0 > 0.0 && t.fx >= prev.1) {
            bracket = Some((prev, (alpha, t.fx, s)));
            break;
        }
        if strong_curv(s) {
            return LineSearch { accepted: Some(t), evaluations: evals };
        }
        if s >= 0.0 {
            bracket = Some(((alpha, t.fx, s), prev));
            break;
        }
        prev = (alpha, t.fx, s);
        alpha *= 2.0;
    }
    let Some((mut lo, mut hi)) = bracket else {
        return LineSearch { accepted: None, evaluations: evals };
    };

    while evals < cfg.max_line_search {
        let width = hi.0 - lo.0;
        if math::abs(width) <= f64::EPSILON * math::abs(lo.0).max(1.0) {
            break;
        }
        let a = cubic_min(lo, hi)
            .filter(|&a| {
                let (l, h) = if lo.0 < hi.0 { (lo.0, hi.0) } else { (hi.0, lo.0) };
                a > l + 0.1 * (h - l) && a < h - 0.1 * (h - l)
            })
            .unwrap_or(lo.0 + 0.5 * width);
        let (t, s, finite) = trial(a, &mut evals);
        if !finite {
            hi = (a, f64::INFINITY, f64::NAN);
            continue;
        }
        if !armijo(&t) || t.fx >= lo.1 {
            hi = (a, t.fx, s);
        } else {
            if strong_curv(s) {
                return LineSearch { accepted: Some(t), evaluations: evals };
            }
            if s * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, t.fx, s);
        }
    }
    LineSearch { accepted: None, evaluations: evals }
}

/// Minimiser of the cubic through two points with values and slopes.
fn cubic_min(a: (f64, f64, f64), b: (f64, f64, f64)) -> Option<f64> {
    let (x1, f1, g1) = a;
    let (x2, f2, g2) = b;
    if !(f2.is_finite() && g2.is_finite()) {
        return None;
    }
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let disc = d1 * d1 - g1 * g2;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = math::sqrt(disc) * if x2 > x1 { 1.0 } else { -1.0 };
    let a = x2 - (x2 - x1) * (g2 + d2 - d1) / (g2 - g1 + 2.0 * d2);
    a.is_finite().then_some(a)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(math::abs(*v)))
}
