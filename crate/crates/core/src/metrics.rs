//! Relative error norms of a network against a reference solution.
//!
//! Interior norms use a polar tensor grid at cell centres with weights
//! `r Δr Δθ`. Boundary norms use a uniform periodic grid; the H^{1/2} norm
//! there is `sqrt(L² part + discrete semi-norm of the difference)`.

use alloc::vec::Vec;

use crate::boundary_data::FourierSeries;
use crate::error::{Error, Result};
use crate::losses::discrete_seminorm;
use crate::math::{self, TAU};
use crate::model::{Jet, JetBatch, Mlp};
use crate::Point;

/// Evaluation grid resolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalGrids {
    pub radial: usize,
    pub angular: usize,
    pub boundary: usize,
}

impl Default for EvalGrids {
    fn default() -> Self {
        Self { radial: 200, angular: 400, boundary: 4096 }
    }
}

impl EvalGrids {
    pub fn validate(&self) -> Result<()> {
        if self.radial == 0 || self.angular == 0 {
            return Err(Error::Config(alloc::format!("interior grid {}×{} is empty", self.radial, self.angular)));
        }
        if self.boundary < 3 {
            return Err(Error::Config(alloc::format!("boundary grid needs at least 3 points, got {}", self.boundary)));
        }
        Ok(())
    }

    /// Both interior resolutions and the boundary resolution doubled.
    pub fn refined(&self) -> Self {
        Self { radial: 2 * self.radial, angular: 2 * self.angular, boundary: 2 * self.boundary }
    }
}

/// The four norms, in the column order of the result tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub h1_inside: f64,
    pub l2_inside: f64,
    pub hhalf_boundary: f64,
    pub l2_boundary: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub rel_h1_inside: f64,
    pub rel_l2_inside: f64,
    pub rel_hhalf_boundary: f64,
    pub rel_l2_boundary: f64,
    /// Norms of the difference before normalisation.
    pub error: Norms,
    pub grids: EvalGrids,
}

/// A function with its gradient, `x ↦ (u, ∇u)`.
pub type FieldFn<'a> = &'a dyn Fn(Point) -> (f64, [f64; 2]);

/// Reference values cached on the evaluation grids.
#[derive(Clone, Debug)]
pub struct ErrorEvaluator {
    grids: EvalGrids,
    interior: Vec<Point>,
    weights: Vec<f64>,
    ref_u: Vec<f64>,
    ref_grad: Vec<[f64; 2]>,
    boundary: Vec<Point>,
    ref_bd: Vec<f64>,
    reference: Norms,
}

const CHUNK: usize = 256;

impl ErrorEvaluator {
    pub fn new(grids: EvalGrids, reference: FieldFn<'_>) -> Result<Self> {
        grids.validate()?;
        let (dr, dt) = (1.0 / grids.radial as f64, TAU / grids.angular as f64);
        let mut interior = Vec::with_capacity(grids.radial * grids.angular);
        let mut weights = Vec::with_capacity(interior.capacity());
        for i in 0..grids.radial {
            let r = (i as f64 + 0.5) * dr;
            for j in 0..grids.angular {
                let t = (j as f64 + 0.5) * dt;
                interior.push([r * math::cos(t), r * math::sin(t)]);
                weights.push(r * dr * dt);
            }
        }
        let (ref_u, ref_grad): (Vec<f64>, Vec<[f64; 2]>) = interior.iter().map(|&x| reference(x)).unzip();
        let boundary: Vec<Point> = (0..grids.boundary)
            .map(|k| {
                let t = TAU * k as f64 / grids.boundary as f64;
                [math::cos(t), math::sin(t)]
            })
            .collect();
        let ref_bd: Vec<f64> = boundary.iter().map(|&x| reference(x).0).collect();
        if ref_u.iter().chain(&ref_bd).any(|v| !v.is_finite()) || ref_grad.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("reference is non-finite on the evaluation grid".into()));
        }

        let mut ev = Self { grids, interior, weights, ref_u, ref_grad, boundary, ref_bd, reference: zero_norms() };
        let zeros_in = alloc::vec![(0.0, [0.0; 2]); ev.interior.len()];
        let zeros_bd = alloc::vec![0.0; ev.boundary.len()];
        let reference = ev.norms(&zeros_in, &zeros_bd);
        for (name, v) in [
            ("interior H¹", reference.h1_inside),
            ("interior L²", reference.l2_inside),
            ("boundary H^{1/2}", reference.hhalf_boundary),
            ("boundary L²", reference.l2_boundary),
        ] {
            if v == 0.0 {
                return Err(Error::DegenerateReference(name));
            }
        }
        ev.reference = reference;
        Ok(ev)
    }

    /// Reference given by the harmonic extension `oracle`.
    pub fn from_oracle(grids: EvalGrids, oracle: &FourierSeries) -> Result<Self> {
        Self::new(grids, &|x| {
            let o = oracle.eval(x).expect("evaluation grids lie in the closed disk");
            (o.u, o.grad)
        })
    }

    pub fn grids(&self) -> EvalGrids {
        self.grids
    }

    /// Norms of the reference itself.
    pub fn reference_norms(&self) -> Norms {
        self.reference
    }

    /// Errors of a network.
    pub fn evaluate(&self, net: &Mlp) -> ErrorReport {
        let mut inside = Vec::with_capacity(self.interior.len());
        for xs in self.interior.chunks(CHUNK) {
            let b = JetBatch::forward(net, xs, Jet::Gradient);
            for p in 0..xs.len() {
                inside.push((b.values()[p], b.gradient(p)));
            }
        }
        let mut bd = Vec::with_capacity(self.boundary.len());
        for xs in self.boundary.chunks(CHUNK) {
            bd.extend_from_slice(JetBatch::forward(net, xs, Jet::Value).values());
        }
        self.report(&inside, &bd)
    }

    /// Errors of an arbitrary candidate field.
    pub fn evaluate_fn(&self, candidate: FieldFn<'_>) -> ErrorReport {
        let inside: Vec<(f64, [f64; 2])> = self.interior.iter().map(|&x| candidate(x)).collect();
        let bd: Vec<f64> = self.boundary.iter().map(|&x| candidate(x).0).collect();
        self.report(&inside, &bd)
    }

    fn report(&self, inside: &[(f64, [f64; 2])], bd: &[f64]) -> ErrorReport {
        let e = self.norms(inside, bd);
        let r = self.reference;
        ErrorReport {
            rel_h1_inside: e.h1_inside / r.h1_inside,
            rel_l2_inside: e.l2_inside / r.l2_inside,
            rel_hhalf_boundary: e.hhalf_boundary / r.hhalf_boundary,
            rel_l2_boundary: e.l2_boundary / r.l2_boundary,
            error: e,
            grids: self.grids,
        }
    }

    /// Norms of `candidate − reference`.
    fn norms(&self, inside: &[(f64, [f64; 2])], bd: &[f64]) -> Norms {
        let (mut l2, mut grad2) = (0.0, 0.0);
        for (k, &(u, g)) in inside.iter().enumerate() {
            let w = self.weights[k];
            let du = u - self.ref_u[k];
            let (g1, g2) = (g[0] - self.ref_grad[k][0], g[1] - self.ref_grad[k][1]);
            l2 += w * (du * du);
            grad2 += w * (g1 * g1 + g2 * g2);
        }
        let diff: Vec<f64> = bd.iter().zip(&self.ref_bd).map(|(u, g)| u - g).collect();
        let h = TAU / diff.len() as f64;
        let l2_bd = h * diff.iter().map(|d| d * d).sum::<f64>();
        let semi = discrete_seminorm(&diff).expect("boundary grid validated");
        Norms {
            h1_inside: math::sqrt(l2 + grad2),
            l2_inside: math::sqrt(l2),
            hhalf_boundary: math::sqrt(l2_bd + semi),
            l2_boundary: math::sqrt(l2_bd),
        }
    }
}

fn zero_norms() -> Norms {
    Norms { h1_inside: 0.0, l2_inside: 0.0, hhalf_boundary: 0.0, l2_boundary: 0.0 }
}

/// One-shot convenience around [`ErrorEvaluator`].
pub fn relative_errors(net: &Mlp, oracle: &FourierSeries, grids: EvalGrids) -> Result<ErrorReport> {
    Ok(ErrorEvaluator::from_oracle(grids, oracle)?.evaluate(net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_data::BoundaryFunction;

    fn small() -> EvalGrids {
        EvalGrids { radial: 40, angular: 80, boundary: 512 }
    }

    fn oracle() -> FourierSeries {
        FourierSeries::fit(&BoundaryFunction::Sin { v: 3 }, 64, 16).unwrap()
    }

    fn field(o: &FourierSeries) -> impl Fn(Point) -> (f64, [f64; 2]) + '_ {
        move |x| {
            let v = o.eval(x).unwrap();
            (v.u, v.grad)
        }
    }

    fn rel(r: &ErrorReport) -> [f64; 4] {
        [r.rel_h1_inside, r.rel_l2_inside, r.rel_hhalf_boundary, r.rel_l2_boundary]
    }

    #[test]
    fn identical_field_has_zero_error() {
        let o = oracle();
        let ev = ErrorEvaluator::from_oracle(small(), &o).unwrap();
        assert_eq!(rel(&ev.evaluate_fn(&field(&o))), [0.0; 4]);
    }

    #[test]
    fn zero_and_doubled_fields_have_unit_error() {
        let o = oracle();
        let ev = ErrorEvaluator::from_oracle(small(), &o).unwrap();
        assert_eq!(rel(&ev.evaluate_fn(&|_| (0.0, [0.0, 0.0]))), [1.0; 4]);
        let f = field(&o);
        let doubled = |x| {
            let (u, g) = f(x);
            (2.0 * u, [2.0 * g[0], 2.0 * g[1]])
        };
        assert_eq!(rel(&ev.evaluate_fn(&doubled)), [1.0; 4]);
        // a zero network is the zero field
        let net = Mlp::zeros(&[2, 4, 1]).unwrap();
        assert_eq!(rel(&ev.evaluate(&net)), [1.0; 4]);
    }

    #[test]
    fn scale_equivariance() {
        let o = oracle();
        let ev = ErrorEvaluator::from_oracle(small(), &o).unwrap();
        let f = field(&o);
        let pert = |x: Point| (libm::cos(x[0]) * x[1], [-libm::sin(x[0]) * x[1], libm::cos(x[0])]);
        let with = |c: f64| {
            let (f, pert) = (&f, &pert);
            move |x: Point| {
                let ((u, g), (p, q)) = (f(x), pert(x));
                (u + c * p, [g[0] + c * q[0], g[1] + c * q[1]])
            }
        };
        let base = rel(&ev.evaluate_fn(&with(1.0)));
        for c in [-3.0, 0.25, 10.0] {
            let r = rel(&ev.evaluate_fn(&with(c)));
            for (a, b) in r.iter().zip(&base) {
                assert!((a - c.abs() * b).abs() < 1e-10 * (1.0 + a), "{a} vs {}", c.abs() * b);
            }
        }
    }

    #[test]
    fn constant_shift_has_equal_interior_norms() {
        let o = oracle();
        let ev = ErrorEvaluator::from_oracle(small(), &o).unwrap();
        let f = field(&o);
        let r = ev.evaluate_fn(&|x| (f(x).0 + 0.3, f(x).1));
        assert!((r.error.h1_inside - r.error.l2_inside).abs() < 1e-15);
        // a constant difference has no boundary semi-norm either
        assert!((r.error.hhalf_boundary - r.error.l2_boundary).abs() < 1e-12);
        assert!((r.error.l2_inside - 0.3 * libm::sqrt(core::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn network_and_closure_routes_agree() {
        let o = oracle();
        let ev = ErrorEvaluator::from_oracle(small(), &o).unwrap();
        let mut net = Mlp::init(&[2, 8, 8, 1], 3).unwrap();
        net.params_mut().iter_mut().enumerate().for_each(|(i, p)| *p += 0.05 * libm::sin(i as f64));
        let a = ev.evaluate(&net);
        let b = ev.evaluate_fn(&|x| {
            let mut tape = crate::autodiff::Tape::new();
            let (v, g, _) = net.forward_dual2(x, &mut tape).values(&tape);
            (v, g)
        });
        assert_eq!(rel(&a), rel(&b));
    }

    #[test]
    fn grid_refinement_is_stable() {
        let o = oracle();
        let mut net = Mlp::init(&[2, 8, 8, 1], 5).unwrap();
        net.params_mut().iter_mut().enumerate().for_each(|(i, p)| *p += 0.1 * libm::cos(i as f64));
        let grids = EvalGrids { radial: 100, angular: 200, boundary: 2048 };
        let coarse = rel(&relative_errors(&net, &o, grids).unwrap());
        let fine = rel(&relative_errors(&net, &o, grids.refined()).unwrap());
        for (c, f) in coarse.iter().zip(&fine) {
            assert!((c - f).abs() < 0.01 * f, "{c} vs {f}");
        }
    }

    #[test]
    fn zero_reference_is_degenerate() {
        let err = ErrorEvaluator::new(small(), &|_| (0.0, [0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::DegenerateReference(_)));
        let bad = EvalGrids { radial: 0, ..small() };
        assert!(matches!(ErrorEvaluator::new(bad, &|_| (1.0, [0.0, 0.0])), Err(Error::Config(_))));
    }
}
