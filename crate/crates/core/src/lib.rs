//! Numerical core for trace-regularity physics-informed neural networks.
//!
//! Everything here is pure computation over `alloc` collections: the
//! companion `trpinn-cli` crate owns configuration, files and the command
//! line. The crate builds without `std` (`default-features = false`).
//!
//! Module map:
//!
//! * [`autodiff`]: scalar reverse-mode tape plus [`autodiff::Dual2`]
//!   (value, input gradient, input Hessian) triples whose components are
//!   tape nodes, so parameter gradients flow through Laplacians.
//! * [`model`]: the tanh multilayer perceptron, with plain, taped and
//!   batched (hand-derived reverse pass) evaluation.
//! * [`geometry`]: unit-disk interior and ordered boundary sampling.
//! * [`boundary_data`]: boundary conditions and the Fourier harmonic
//!   extension used as ground truth.
//! * [`losses`]: interior residual, boundary L² and the neighbour-pair
//!   boundary semi-norm.
//! * [`quadrature`]: reference double-integral quadratures of the
//!   H^{1/2} semi-norm.
//! * [`metrics`]: relative error norms against the oracle.
//! * [`optimize`]: Adam and L-BFGS with a strong-Wolfe line search.
//! * [`ntk`]: boundary kernel, dynamics matrix and spectra.
//! * [`coeffs`]: mollification of coefficient fields.
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod boundary_data;
pub mod coeffs;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod ntk;
pub mod optimize;
pub mod quadrature;

mod fft;
mod math;

pub use error::{Error, Result};

/// A point of the plane, `[x1, x2]`.
pub type Point = [f64; 2];
