//! Mollification of bounded symmetric coefficient fields `a^{ij}`.
//!
//! The kernel is the standard bump `exp(−1/(1 − |y|²/ε²))` sampled on the
//! lattice `hZ²` (`h = ε / cells_per_radius`) and renormalised to unit
//! mass. The mollified field is computed at lattice nodes and bilinearly
//! interpolated in between, so it is Lipschitz with a computable bound.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math;
use crate::Point;

/// Symmetric 2×2 matrix `[a11, a12, a22]`.
pub type Sym2 = [f64; 3];

/// Eigenvalues `(λ_min, λ_max)` of a symmetric 2×2 matrix.
pub fn sym2_eigenvalues(a: Sym2) -> (f64, f64) {
    let mean = 0.5 * (a[0] + a[2]);
    let half = 0.5 * (a[0] - a[2]);
    let r = math::sqrt(half * half + a[1] * a[1]);
    (mean - r, mean + r)
}

/// A coefficient field evaluable anywhere in the plane.
pub trait CoefficientField {
    fn eval(&self, x: Point) -> Sym2;
}

impl<F: Fn(Point) -> Sym2> CoefficientField for F {
    fn eval(&self, x: Point) -> Sym2 {
        self(x)
    }
}

/// Samples on the uniform grid `lo + (i, j) h`, `0 ≤ i, j < n`, extended
/// to the whole plane by the nearest grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub lo: Point,
    pub h: f64,
    pub n: usize,
    pub values: Vec<Sym2>,
}

impl GridField {
    pub fn from_fn(lo: Point, h: f64, n: usize, f: impl Fn(Point) -> Sym2) -> Result<Self> {
        if n == 0 || !(h > 0.0) {
            bail!(Config, "grid needs n ≥ 1 and h > 0");
        }
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f([lo[0] + i as f64 * h, lo[1] + j as f64 * h]));
            }
        }
        Ok(Self { lo, h, n, values })
    }

    fn nearest(&self, t: f64) -> usize {
        let k = libm::round(t / self.h);
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n - 1)
        }
    }
}

impl CoefficientField for GridField {
    fn eval(&self, x: Point) -> Sym2 {
        let i = self.nearest(x[0] - self.lo[0]);
        let j = self.nearest(x[1] - self.lo[1]);
        self.values[i * self.n + j]
    }
}

/// Normalised discrete bump of radius `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    pub eps: f64,
    pub h: f64,
    /// Lattice offsets and weights, weights summing to one.
    pub kernel: Vec<([i32; 2], f64)>,
}

impl Mollifier {
    pub fn new(eps: f64, cells_per_radius: usize) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            bail!(Config, "mollification radius must be positive, got {eps}");
        }
        if cells_per_radius < 2 {
            bail!(Config, "kernel needs at least 2 cells per radius");
        }
        let h = eps / cells_per_radius as f64;
        let r = cells_per_radius as i32;
        let mut kernel = Vec::new();
        for i in -r..=r {
            for j in -r..=r {
                let q = ((i * i + j * j) as f64) / (r * r) as f64;
                if q < 1.0 {
                    kernel.push(([i, j], math::exp(-1.0 / (1.0 - q))));
                }
            }
        }
        let mass: f64 = kernel.iter().map(|(_, w)| w).sum();
        kernel.iter_mut().for_each(|(_, w)| *w /= mass);
        Ok(Self { eps, h, kernel })
    }

    /// Mollified value at lattice node `(i, j) h`.
    pub fn node_value(&self, a: &dyn CoefficientField, node: [i64; 2]) -> Sym2 {
        let mut out = [0.0; 3];
        for &([di, dj], w) in &self.kernel {
            let y = [(node[0] - di as i64) as f64 * self.h, (node[1] - dj as i64) as f64 * self.h];
            let v = a.eval(y);
            for c in 0..3 {
                out[c] += w * v[c];
            }
        }
        out
    }

    /// `Σ_k |K(k + e₁) − K(k)| / h`: with `sup |a| ≤ A`, lattice
    /// difference quotients of the mollified field are at most `A` times
    /// this.
    pub fn difference_quotient_factor(&self) -> f64 {
        let lookup = |o: [i32; 2]| self.kernel.iter().find(|(k, _)| *k == o).map_or(0.0, |(_, w)| *w);
        let r = libm::round(self.eps / self.h) as i32;
        let mut total = 0.0;
        for i in -r - 1..=r {
            for j in -r..=r {
                total += math::abs(lookup([i + 1, j]) - lookup([i, j]));
            }
        }
        total / self.h
    }

    pub fn apply<'a>(&'a self, a: &'a dyn CoefficientField) -> Mollified<'a> {
        Mollified { mollifier: self, source: a }
    }
}

/// `a_ε`, evaluable anywhere by bilinear interpolation of lattice values.
pub struct Mollified<'a> {
    mollifier: &'a Mollifier,
    source: &'a dyn CoefficientField,
}

impl Mollified<'_> {
    pub fn node_value(&self, node: [i64; 2]) -> Sym2 {
        self.mollifier.node_value(self.source, node)
    }
}

impl CoefficientField for Mollified<'_> {
    fn eval(&self, x: Point) -> Sym2 {
        let h = self.mollifier.h;
        let (sx, sy) = (x[0] / h, x[1] / h);
        let (fx, fy) = (libm::floor(sx), libm::floor(sy));
        let (tx, ty) = (sx - fx, sy - fy);
        let (i, j) = (fx as i64, fy as i64);
        let mut out = [0.0; 3];
        for (di, dj, w) in [(0, 0, (1.0 - tx) * (1.0 - ty)), (1, 0, tx * (1.0 - ty)), (0, 1, (1.0 - tx) * ty), (1, 1, tx * ty)] {
            if w == 0.0 {
                continue;
            }
            let v = self.node_value([i + di, j + dj]);
            for c in 0..3 {
                out[c] += w * v[c];
            }
        }
        out
    }
}

/// `mollify(a, ε)` with 8 lattice cells per kernel radius.
pub fn mollify(eps: f64) -> Result<Mollifier> {
    Mollifier::new(eps, 8)
}

/// `(min λ_min, max λ_max)` over the given points.
pub fn ellipticity_bounds(a: &dyn CoefficientField, points: &[Point]) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        let (l, u) = sym2_eigenvalues(a.eval(x));
        (lo.min(l), hi.max(u))
    })
}

/// `diag(1, 1)` and `diag(2, 2)` on alternating squares of side `cell`.
pub fn checkerboard(cell: f64) -> impl Fn(Point) -> Sym2 {
    move |x| {
        let parity = (libm::floor(x[0] / cell) + libm::floor(x[1] / cell)) as i64;
        let c = if parity.rem_euclid(2) == 0 { 1.0 } else { 2.0 };
        [c, 0.0, c]
    }
}
