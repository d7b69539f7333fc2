//! Shared numerical kernels.
//!
//! Everything here is a pure function of its inputs. The kernels double as
//! independent oracles for the closed-form results elsewhere in the crate, so
//! none of them know anything about the statistical manifold.

mod diff;
mod fit;
mod ode;
mod optimize;
mod quadrature;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use diff::{default_step, finite_diff, DiffOrder};
pub use fit::{fit_exponent, fit_exponential_rate, linear_least_squares, FitResult};
pub use ode::{ode_solve, OdeSolution};
pub use optimize::{maximize_1d, Maximum};
pub use quadrature::{quadrature, quadrature_with_breaks};

/// Error tolerances and work limits for the adaptive kernels.
///
/// `max_steps` bounds accepted+rejected steps for [`ode_solve`] and the number
/// of subintervals for [`quadrature`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl ToleranceSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_steps: usize) -> Result<Self> {
        let tol = ToleranceSpec {
            abs_tol,
            rel_tol,
            max_steps,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::invalid("abs_tol", "must be finite and >= 0"));
        }
        if !(self.rel_tol >= 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid("rel_tol", "must be finite and >= 0"));
        }
        if self.abs_tol == 0.0 && self.rel_tol == 0.0 {
            return Err(Error::invalid(
                "tolerance",
                "at least one of abs_tol, rel_tol must be positive",
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be at least 1"));
        }
        Ok(())
    }

    /// Same limits with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        ToleranceSpec {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_steps: self.max_steps,
        }
    }
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_steps: 200_000,
        }
    }
}
