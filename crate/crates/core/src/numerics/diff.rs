use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOrder {
    First,
    Second,
}

/// Default step `1e-5 * max(1, |x|)`.
pub fn default_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Second-order central difference of `f` at `x`.
pub fn finite_diff<F: Fn(f64) -> f64>(f: F, x: f64, order: DiffOrder, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "step must be positive and finite"));
    }
    let d = match order {
        DiffOrder::First => (f(x + h) - f(x - h)) / (2.0 * h),
        DiffOrder::Second => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
    };
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite {
            what: "finite difference",
            x,
        })
    }
}
