//! Numerical information geometry of the correlated 2l-dimensional Gaussian
//! statistical manifold.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: ODE integration, quadrature, finite differences, 1-D
//!   maximisation and power-law fitting.
//! * [`manifold`]: the block Fisher–Rao metric, its diagonalisation, the three
//!   coordinate frames and curvature of the asymptotic diagonal metric.
//! * [`embedding`]: induced metric coefficients and correlation coefficients
//!   obtained from embedding constraints.
//! * [`geodesics`]: geodesic equations in every frame, closed-form solutions
//!   and a numeric integration harness.
//! * [`complexity`]: information geometric complexity and entropy curves.
//! * [`jacobi`]: geodesic deviation, Jacobi field intensities and attenuation
//!   factors.
//! * [`oracle`]: brute-force finite-difference geometry on a materialised
//!   metric, used to cross-check the closed forms.
//! * [`verification`]: the acceptance checks, shared by the test suite and the
//!   `verify` command.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complexity;
pub mod embedding;
mod error;
pub mod geodesics;
pub mod jacobi;
pub mod manifold;
pub mod numerics;
pub mod oracle;
pub mod verification;

pub use error::{Error, Result};
pub use manifold::{CoordinateFrame, ModelParams, PairParams};
pub use numerics::ToleranceSpec;

/// States whose scale coordinate falls to or below this value are treated as
/// singular; the metric blows up as `1/sigma^2`.
pub const SINGULARITY_GUARD: f64 = 1e-12;
