//! Reference quadratures of the continuous boundary semi-norm
//! `∬ |g(s) − g(t)|² / |s − t|² ds dt`.
//!
//! The rule is the midpoint tensor rule on `m × m` cells. Diagonal cells,
//! whose centres coincide, are skipped, so the singular kernel is never
//! evaluated at zero distance. Distances are parameter (arc-length)
//! distances, wrapped on periodic domains.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math::{PI, TAU};

/// Parameter interval, optionally periodic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub start: f64,
    pub end: f64,
    pub periodic: bool,
}

impl Domain {
    pub fn interval(start: f64, end: f64) -> Self {
        Self { start, end, periodic: false }
    }

    pub fn periodic(start: f64, end: f64) -> Self {
        Self { start, end, periodic: true }
    }

    /// The unit circle parametrised by angle.
    pub fn circle() -> Self {
        Self::periodic(0.0, TAU)
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeminormQuadSpec {
    pub m: usize,
    pub delta: Option<f64>,
    pub domain: Domain,
}

impl SeminormQuadSpec {
    pub fn new(m: usize, delta: Option<f64>, domain: Domain) -> Result<Self> {
        if m < 16 {
            bail!(Config, "quadrature grid needs m ≥ 16, got {m}");
        }
        if let Some(d) = delta {
            if !(d > 0.0 && d <= PI) {
                bail!(Config, "localisation radius must lie in (0, π], got {d}");
            }
        }
        if !(domain.end > domain.start) || !domain.start.is_finite() || !domain.end.is_finite() {
            bail!(Config, "degenerate parameter interval [{}, {}]", domain.start, domain.end);
        }
        Ok(Self { m, delta, domain })
    }
}

/// Value at `m`, at `2m`, and the first-order Richardson combination
/// `2·Q(2m) − Q(m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub m: usize,
    pub value: f64,
    pub refined: f64,
    pub richardson: f64,
}

/// Whole-domain semi-norm; a `delta` in the spec is ignored.
pub fn seminorm_full(g: &dyn Fn(f64) -> f64, spec: &SeminormQuadSpec) -> Result<QuadResult> {
    run(g, spec, None)
}

/// Semi-norm restricted to cell pairs closer than `δ`.
pub fn seminorm_delta(g: &dyn Fn(f64) -> f64, spec: &SeminormQuadSpec) -> Result<QuadResult> {
    let Some(delta) = spec.delta else {
        bail!(Config, "localised semi-norm needs a radius δ");
    };
    run(g, spec, Some(delta))
}

fn run(g: &dyn Fn(f64) -> f64, spec: &SeminormQuadSpec, delta: Option<f64>) -> Result<QuadResult> {
    let value = midpoint(&centres(g, spec.domain, spec.m)?, spec.domain, delta)?;
    let refined = midpoint(&centres(g, spec.domain, 2 * spec.m)?, spec.domain, delta)?;
    Ok(QuadResult { m: spec.m, value, refined, richardson: 2.0 * refined - value })
}

fn centres(g: &dyn Fn(f64) -> f64, domain: Domain, m: usize) -> Result<Vec<f64>> {
    let h = domain.length() / m as f64;
    let v: Vec<f64> = (0..m).map(|i| g(domain.start + (i as f64 + 0.5) * h)).collect();
    if v.iter().any(|x| !x.is_finite()) {
        bail!(Data, "non-finite sample of the integrand");
    }
    Ok(v)
}

/// Midpoint rule from values at the `m` cell centres of `domain`.
pub fn midpoint(values: &[f64], domain: Domain, delta: Option<f64>) -> Result<f64> {
    let m = values.len();
    if m < 2 {
        bail!(Config, "need at least two cells");
    }
    if values.iter().any(|x| !x.is_finite()) {
        bail!(Data, "non-finite sample of the integrand");
    }
    let len = domain.length();
    let h = len / m as f64;
    // on a periodic domain every distance is at most half the period
    let delta = delta.filter(|&d| !(domain.periodic && d >= 0.5 * len));
    let mut total = 0.0;
    for k in 1..m {
        let steps = if domain.periodic { k.min(m - k) } else { k };
        let dist = steps as f64 * h;
        if let Some(d) = delta {
            if dist >= d {
                continue;
            }
        }
        let pairs = if domain.periodic { m } else { m - k };
        let mut s = 0.0;
        for i in 0..pairs {
            let diff = values[(i + k) % m] - values[i];
            s += diff * diff;
        }
        let w = if domain.periodic { 1.0 } else { 2.0 };
        total += w * s / (dist * dist);
    }
    Ok(total * h * h)
}
