//! PINN and TRPINN objectives.
//!
//! Two routes compute the same numbers. The tape route (`loss_*` functions)
//! builds every quantity from scalar nodes and is the reference.
//! [`LossProblem`] evaluates the objective and its parameter gradient with
//! batched jets and is what the optimizers call. Loss values agree bit for
//! bit between the routes; gradients agree to rounding.

use alloc::vec::Vec;

use crate::autodiff::{Node, Tape};
use crate::boundary_data::BoundaryFunction;
use crate::error::{bail, Result};
use crate::geometry::{BoundarySet, InteriorSet};
use crate::model::{Jet, JetBatch, Mlp, TapedMlp};
use crate::Point;

/// `α ℓ_inside + β ℓ_boundary + γ ℓ_semi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, w) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !w.is_finite() || w < 0.0 {
                bail!(Config, "loss weight {name} must be finite and nonnegative, got {w}");
            }
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// `γ = 0`.
    pub fn is_vanilla(&self) -> bool {
        self.gamma == 0.0
    }
}

/// `Σ (e_{i+1} − e_i)² + Σ (e_{i+2} − e_i)²` with wraparound. All adjacent
/// terms are summed first, then all skip terms, left to right.
pub fn discrete_seminorm(e: &[f64]) -> Result<f64> {
    let n = e.len();
    if n < 3 {
        bail!(Config, "discrete semi-norm needs at least 3 points, got {n}");
    }
    let mut acc = 0.0;
    for step in [1, 2] {
        for i in 0..n {
            let d = e[(i + step) % n] - e[i];
            acc += d * d;
        }
    }
    Ok(acc)
}

/// Gradient of [`discrete_seminorm`] with respect to `e`.
pub fn discrete_seminorm_grad(e: &[f64]) -> Result<Vec<f64>> {
    let n = e.len();
    if n < 3 {
        bail!(Config, "discrete semi-norm needs at least 3 points, got {n}");
    }
    Ok((0..n)
        .map(|i| {
            let adj = 2.0 * e[i] - e[(i + n - 1) % n] - e[(i + 1) % n];
            let skip = 2.0 * e[i] - e[(i + n - 2) % n] - e[(i + 2) % n];
            2.0 * adj + 2.0 * skip
        })
        .collect())
}

/// Tape version of [`discrete_seminorm`], same summation order.
pub fn discrete_seminorm_nodes(tape: &mut Tape, e: &[Node]) -> Result<Node> {
    let n = e.len();
    if n < 3 {
        bail!(Config, "discrete semi-norm needs at least 3 points, got {n}");
    }
    let mut terms = Vec::with_capacity(2 * n);
    for step in [1, 2] {
        for i in 0..n {
            let d = tape.sub(e[(i + step) % n], e[i]);
            terms.push(tape.square(d));
        }
    }
    Ok(tape.sum(&terms))
}

/// Mean of `(Δu − f)²` over the interior set.
pub fn loss_inside(net: &TapedMlp, tape: &mut Tape, interior: &InteriorSet, f: &dyn Fn(Point) -> f64) -> Result<Node> {
    if interior.is_empty() {
        bail!(Config, "interior set is empty");
    }
    let mut terms = Vec::with_capacity(interior.len());
    for &x in &interior.points {
        let d = net.forward_dual2(tape, x);
        let lap = d.laplacian(tape);
        let r = tape.add_const(lap, -f(x));
        terms.push(tape.square(r));
    }
    let s = tape.sum(&terms);
    Ok(tape.scale(s, 1.0 / interior.len() as f64))
}

/// Boundary residuals `u(x_i) − g(θ_i)` in sampling order.
pub fn boundary_residuals(net: &TapedMlp, tape: &mut Tape, boundary: &BoundarySet, g: &BoundaryFunction) -> Vec<Node> {
    boundary
        .points
        .iter()
        .zip(&boundary.angles)
        .map(|(&x, &t)| {
            let u = net.forward_value(tape, x);
            tape.add_const(u, -g.eval(t))
        })
        .collect()
}

fn mean_square(tape: &mut Tape, e: &[Node]) -> Node {
    let sq: Vec<Node> = e.iter().map(|&r| tape.square(r)).collect();
    let s = tape.sum(&sq);
    tape.scale(s, 1.0 / e.len() as f64)
}

/// Mean of `(u − g)²` over the boundary set.
pub fn loss_boundary_l2(net: &TapedMlp, tape: &mut Tape, boundary: &BoundarySet, g: &BoundaryFunction) -> Result<Node> {
    if boundary.is_empty() {
        bail!(Config, "boundary set is empty");
    }
    let e = boundary_residuals(net, tape, boundary, g);
    Ok(mean_square(tape, &e))
}

/// `α ℓ_inside + β ℓ_boundary + γ [u − g]²`. With `γ = 0` the semi-norm
/// node is not built and the result is the vanilla PINN loss.
pub fn loss_total(
    net: &TapedMlp,
    tape: &mut Tape,
    interior: &InteriorSet,
    boundary: &BoundarySet,
    g: &BoundaryFunction,
    f: &dyn Fn(Point) -> f64,
    w: LossWeights,
) -> Result<Node> {
    let inside = loss_inside(net, tape, interior, f)?;
    if boundary.is_empty() {
        bail!(Config, "boundary set is empty");
    }
    let e = boundary_residuals(net, tape, boundary, g);
    let bd = mean_square(tape, &e);
    let a = tape.scale(inside, w.alpha);
    let b = tape.scale(bd, w.beta);
    let pinn = tape.add(a, b);
    if w.is_vanilla() {
        return Ok(pinn);
    }
    let semi = discrete_seminorm_nodes(tape, &e)?;
    let c = tape.scale(semi, w.gamma);
    Ok(tape.add(pinn, c))
}

/// Loss components at one parameter vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub inside: f64,
    pub boundary: f64,
    pub seminorm: f64,
    pub total: f64,
}

/// Fixed training data plus weights; evaluates the objective with batched
/// jets.
#[derive(Clone, Debug)]
pub struct LossProblem {
    interior: Vec<Point>,
    f_values: Vec<f64>,
    boundary: Vec<Point>,
    g_values: Vec<f64>,
    weights: LossWeights,
    chunk: usize,
}

/// Interior points per batched jet.
pub const DEFAULT_CHUNK: usize = 64;

impl LossProblem {
    pub fn new(
        interior: &InteriorSet,
        boundary: &BoundarySet,
        g: &BoundaryFunction,
        f: &dyn Fn(Point) -> f64,
        weights: LossWeights,
    ) -> Result<Self> {
        if interior.is_empty() {
            bail!(Config, "interior set is empty");
        }
        if boundary.len() < 3 {
            bail!(Config, "boundary set needs at least 3 points, got {}", boundary.len());
        }
        Ok(Self {
            interior: interior.points.clone(),
            f_values: interior.points.iter().map(|&x| f(x)).collect(),
            boundary: boundary.points.clone(),
            g_values: boundary.angles.iter().map(|&t| g.eval(t)).collect(),
            weights,
            chunk: DEFAULT_CHUNK,
        })
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }

    pub fn weights(&self) -> LossWeights {
        self.weights
    }

    /// Loss components without a gradient.
    pub fn evaluate(&self, net: &Mlp) -> LossParts {
        self.run(net, None)
    }

    /// Loss components; `grad` is overwritten with the parameter gradient
    /// of the total.
    pub fn value_and_grad(&self, net: &Mlp, grad: &mut [f64]) -> LossParts {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.run(net, Some(grad))
    }

    fn run(&self, net: &Mlp, mut grad: Option<&mut [f64]>) -> LossParts {
        let w = self.weights;
        let n_in = self.interior.len();
        let mut sum_in = 0.0;
        let mut adj = Vec::new();
        for (xs, fs) in self.interior.chunks(self.chunk).zip(self.f_values.chunks(self.chunk)) {
            let batch = JetBatch::forward(net, xs, Jet::Hessian);
            adj.clear();
            for (p, &fv) in fs.iter().enumerate() {
                let r = batch.laplacian(p) + -fv;
                sum_in += r * r;
                adj.push(w.alpha * (2.0 * r) / n_in as f64);
            }
            if let Some(g) = grad.as_deref_mut() {
                batch.backward(net, None, Some(&adj), g);
            }
        }
        let inside = sum_in * (1.0 / n_in as f64);

        let n_bd = self.boundary.len();
        let batch = JetBatch::forward(net, &self.boundary, Jet::Value);
        let e: Vec<f64> = batch.values().iter().zip(&self.g_values).map(|(u, g)| u + -g).collect();
        let boundary = e.iter().fold(0.0, |acc, r| acc + r * r) * (1.0 / n_bd as f64);
        let seminorm = discrete_seminorm(&e).expect("boundary size checked at construction");

        let pinn = w.alpha * inside + w.beta * boundary;
        let total = if w.is_vanilla() { pinn } else { pinn + w.gamma * seminorm };

        if let Some(g) = grad {
            let mut adj: Vec<f64> = e.iter().map(|r| w.beta * (2.0 * r) / n_bd as f64).collect();
            if !w.is_vanilla() {
                let ds = discrete_seminorm_grad(&e).expect("boundary size checked at construction");
                for (a, d) in adj.iter_mut().zip(ds) {
                    *a += w.gamma * d;
                }
            }
            batch.backward(net, Some(&adj), None, g);
        }
        LossParts { inside, boundary, seminorm, total }
    }
}

/// Boundary residual vector `u(x_i) − g(θ_i)` from the plain network.
pub fn residuals_plain(net: &Mlp, boundary: &BoundarySet, g: &BoundaryFunction) -> Vec<f64> {
    boundary.points.iter().zip(&boundary.angles).map(|(&x, &t)| net.forward(x) - g.eval(t)).collect()
}

/// `f ≡ 0`, the Laplace source used throughout the experiments.
pub fn laplace_source() -> impl Fn(Point) -> f64 {
    |_| 0.0
}
