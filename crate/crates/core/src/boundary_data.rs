//! Dirichlet data on the unit circle and its harmonic extension.
//!
//! The ground truth for the Laplace problem on the unit disk is the
//! harmonic extension of the boundary data. Writing `z = x1 + i x2` and
//! `g(θ) = Σ c_n e^{inθ}`, the extension is
//! `u(z) = c₀ + 2 Re Σ_{n≥1} c_n zⁿ`, which [`FourierSeries`] evaluates
//! together with its gradient.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::fft::fft_forward;
use crate::math::{self, PI, TAU};
use crate::Point;

/// Boundary condition as a function of the polar angle.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryFunction {
    /// `sin(Vθ)`.
    Sin { v: u32 },
    /// Square-root cusps: `(1/V) g₁(Vθ)` with the periodic profile
    /// [`sharp_profile`].
    Sharp { v: u32 },
    /// Values on the uniform grid `2πj/K`, linearly interpolated with
    /// wraparound.
    Samples(Vec<f64>),
}

/// The periodic profile `g₁` on `[0, 2π]`: `½ - √|(t - π/2)/2π|` on
/// `[0, π)` and `√|(t - 3π/2)/2π| - ½` on `[π, 2π]`, evaluated verbatim.
pub fn sharp_profile(t: f64) -> f64 {
    if t < PI {
        0.5 - math::sqrt(math::abs((t - PI / 2.0) / TAU))
    } else {
        math::sqrt(math::abs((t - 1.5 * PI) / TAU)) - 0.5
    }
}

impl BoundaryFunction {
    pub fn samples(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            bail!(Config, "sampled boundary function needs at least one value");
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!(Data, "sampled boundary function has non-finite values");
        }
        Ok(Self::Samples(values))
    }

    /// Value at angle `t` (any real; reduced modulo 2π).
    pub fn eval(&self, t: f64) -> f64 {
        let t = math::wrap_angle(t);
        match self {
            Self::Sin { v } => math::sin(*v as f64 * t),
            Self::Sharp { v } => {
                let v = *v as f64;
                sharp_profile(math::wrap_angle(v * t)) / v
            }
            Self::Samples(vals) => {
                let k = vals.len();
                let s = t / TAU * k as f64;
                let j = (libm::floor(s) as usize).min(k - 1);
                let frac = s - j as f64;
                vals[j] * (1.0 - frac) + vals[(j + 1) % k] * frac
            }
        }
    }
}

/// Harmonic-extension value and gradient at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleValue {
    pub u: f64,
    pub grad: [f64; 2],
}

/// Truncated Fourier series of real boundary data, `c_n` for `0 ≤ n ≤ N`;
/// negative modes follow from `c_{-n} = conj(c_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries {
    coeffs: Vec<Complex64>,
}

impl FourierSeries {
    /// `c_n = (1/K) Σ_j g(t_j) e^{-i n t_j}` on `t_j = 2πj/K`. A radix-2
    /// FFT is used when `K` is a power of two, a direct sum otherwise.
    pub fn fit(g: &BoundaryFunction, n_samples: usize, n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            bail!(Config, "at least one Fourier mode is required");
        }
        if n_samples < 2 * n_modes + 1 {
            bail!(Config, "{n_samples} samples cannot resolve {n_modes} modes (need at least {})", 2 * n_modes + 1);
        }
        let samples: Vec<f64> = (0..n_samples).map(|j| g.eval(TAU * j as f64 / n_samples as f64)).collect();
        if samples.iter().any(|v| !v.is_finite()) {
            bail!(Data, "boundary function produced non-finite samples");
        }
        let scale = 1.0 / n_samples as f64;
        let coeffs = if n_samples.is_power_of_two() {
            let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft_forward(&mut buf);
            buf.truncate(n_modes + 1);
            buf.iter().map(|c| c * scale).collect()
        } else {
            dft_direct(&samples, n_modes, scale)
        };
        Self::from_coefficients(coeffs)
    }

    /// Wraps nonnegative-mode coefficients; `c₀` is forced real.
    pub fn from_coefficients(mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() < 2 {
            bail!(Config, "series needs c₀ and at least one mode");
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            bail!(Data, "non-finite Fourier coefficient");
        }
        coeffs[0].im = 0.0;
        Ok(Self { coeffs })
    }

    /// Highest retained mode `N`.
    pub fn modes(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `c_n` for any `|n| ≤ N`, zero beyond.
    pub fn coefficient(&self, n: i64) -> Complex64 {
        let k = n.unsigned_abs() as usize;
        match self.coeffs.get(k) {
            Some(c) if n >= 0 => *c,
            Some(c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Nonnegative-mode coefficients `c₀ … c_N`.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Harmonic extension and gradient at `x`, `|x| ≤ 1`.
    pub fn eval(&self, x: Point) -> Result<OracleValue> {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if !(r2 <= (1.0 + 1e-12) * (1.0 + 1e-12)) {
            bail!(Domain, "point ({}, {}) lies outside the unit disk", x[0], x[1]);
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: Point) -> OracleValue {
        let z = Complex64::new(x[0], x[1]);
        // Horner for Q(z) = Σ_{n≥1} c_n z^{n-1} and Q'(z); then S = zQ,
        // S' = Q + zQ'.
        let mut q = Complex64::new(0.0, 0.0);
        let mut dq = Complex64::new(0.0, 0.0);
        for c in self.coeffs[1..].iter().rev() {
            dq = dq * z + q;
            q = q * z + c;
        }
        let s = z * q;
        let ds = q + z * dq;
        OracleValue { u: self.coeffs[0].re + 2.0 * s.re, grad: [2.0 * ds.re, -2.0 * ds.im] }
    }

    /// Series value on the circle at angle `t`.
    pub fn eval_boundary(&self, t: f64) -> f64 {
        self.eval_unchecked([math::cos(t), math::sin(t)]).u
    }

    /// Max |series − g| over `n_grid` equispaced boundary angles.
    pub fn max_boundary_error(&self, g: &BoundaryFunction, n_grid: usize) -> f64 {
        (0..n_grid)
            .map(|j| {
                let t = TAU * j as f64 / n_grid as f64;
                math::abs(self.eval_boundary(t) - g.eval(t))
            })
            .fold(0.0, f64::max)
    }
}

fn dft_direct(samples: &[f64], n_modes: usize, scale: f64) -> Vec<Complex64> {
    let k = samples.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n_modes + 1];
    for (n, c) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in samples.iter().enumerate() {
            // reduce the phase index first so large n·j stays exact
            let a = -TAU * ((n * j) % k) as f64 / k as f64;
            acc += Complex64::new(v * math::cos(a), v * math::sin(a));
        }
        *c = acc * scale;
    }
    out
}
