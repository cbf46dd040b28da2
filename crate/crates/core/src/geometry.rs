//! Collocation sampling on the unit disk and its boundary circle.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};
use crate::math::{self, TAU};
use crate::Point;

/// Interior collocation points, strictly inside the unit disk.
#[derive(Clone, Debug, PartialEq)]
pub struct InteriorSet {
    pub points: Vec<Point>,
    pub seed: u64,
}

impl InteriorSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// i.i.d. uniform points on the open unit disk via `r = √U₁`, `θ = 2πU₂`.
pub fn sample_interior(n: usize, seed: u64) -> Result<InteriorSet> {
    if n == 0 {
        bail!(Config, "interior sample count must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let r = math::sqrt(rng.gen::<f64>());
        let t = TAU * rng.gen::<f64>();
        let p = [r * math::cos(t), r * math::sin(t)];
        // rounding can land a draw with r ≈ 1 on the circle
        if p[0] * p[0] + p[1] * p[1] < 1.0 {
            points.push(p);
        }
    }
    Ok(InteriorSet { points, seed })
}

/// Boundary sampling rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryMethod {
    /// Equispaced angles starting at 0.
    Linspace,
    /// One uniform draw inside each of `n` equal angular cells.
    Randomized,
    /// `n` i.i.d. uniform angles, sorted.
    Uniform,
}

impl BoundaryMethod {
    pub const ALL: [BoundaryMethod; 3] = [Self::Linspace, Self::Randomized, Self::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Linspace => "linspace",
            Self::Randomized => "randomized",
            Self::Uniform => "uniform",
        }
    }
}

impl fmt::Display for BoundaryMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linspace" => Ok(Self::Linspace),
            "randomized" => Ok(Self::Randomized),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Config(alloc::format!("unknown boundary method `{other}`"))),
        }
    }
}

/// Counterclockwise-ordered samples on the unit circle. Indices wrap:
/// point `n` is point `0` again.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySet {
    /// Strictly increasing, in `[0, 2π)`.
    pub angles: Vec<f64>,
    pub points: Vec<Point>,
    pub method: BoundaryMethod,
    pub seed: u64,
}

impl BoundarySet {
    /// Builds a set from explicit angles, which must be strictly increasing
    /// in `[0, 2π)`.
    pub fn from_angles(angles: Vec<f64>, method: BoundaryMethod, seed: u64) -> Result<Self> {
        if angles.iter().any(|&t| !(0.0..TAU).contains(&t)) {
            bail!(Data, "boundary angles must lie in [0, 2π)");
        }
        if angles.windows(2).any(|w| w[0] >= w[1]) {
            bail!(Data, "boundary angles must be strictly increasing");
        }
        let points = angles.iter().map(|&t| [math::cos(t), math::sin(t)]).collect();
        Ok(Self { angles, points, method, seed })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Lower edge of the `i`-th of `n` equal cells of `[0, 2π)`.
pub fn cell_start(i: usize, n: usize) -> f64 {
    TAU * i as f64 / n as f64
}

pub fn sample_boundary(method: BoundaryMethod, n: usize, seed: u64) -> Result<BoundarySet> {
    if n < 3 {
        bail!(Config, "boundary sample count must be at least 3, got {n}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles: Vec<f64> = match method {
        BoundaryMethod::Linspace => (0..n).map(|i| cell_start(i, n)).collect(),
        BoundaryMethod::Randomized => (0..n)
            .map(|i| {
                let (lo, hi) = (cell_start(i, n), cell_start(i + 1, n));
                let t = lo + rng.gen::<f64>() * (hi - lo);
                if t >= hi {
                    math::next_down(hi)
                } else {
                    t
                }
            })
            .collect(),
        BoundaryMethod::Uniform => {
            let mut a: Vec<f64> = (0..n).map(|_| TAU * rng.gen::<f64>()).collect();
            a.sort_by(f64::total_cmp);
            for i in 1..n {
                if a[i] <= a[i - 1] {
                    a[i] = math::next_up(a[i - 1]);
                }
            }
            a
        }
    };
    BoundarySet::from_angles(angles, method, seed)
}
