use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const GRID: usize = 400;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maximum {
    pub argmax: f64,
    pub max: f64,
}

/// Maximises `f` on the open interval `(lo, hi)`.
///
/// A uniform grid of interior points locates the best cell, then
/// golden-section search polishes inside the neighbouring cells until the
/// bracket is narrower than `tol`. The endpoints themselves are never
/// evaluated; a monotone function yields an argmax within `tol` of the
/// upper (or lower) boundary.
pub fn maximize_1d<F: Fn(f64) -> f64>(f: F, interval: (f64, f64), tol: f64) -> Result<Maximum> {
    let (lo, hi) = interval;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("interval", "need finite lo < hi"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let width = (hi - lo) / GRID as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..GRID {
        let x = lo + (i as f64 + 0.5) * width;
        let v = f(x);
        if v > best.1 {
            best = (i, v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::NonFinite {
            what: "maximize_1d objective",
            x: lo,
        });
    }
    let centre = lo + (best.0 as f64 + 0.5) * width;
    let mut a = (centre - width).max(lo);
    let mut b = (centre + width).min(hi);

    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
        if x1 <= a || x2 >= b {
            break;
        }
    }
    let mut result = if f1 >= f2 {
        Maximum {
            argmax: x1,
            max: f1,
        }
    } else {
        Maximum {
            argmax: x2,
            max: f2,
        }
    };
    if best.1 > result.max {
        result = Maximum {
            argmax: centre,
            max: best.1,
        };
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola() {
        let m = maximize_1d(|r| -(r - 0.3) * (r - 0.3), (0.0, 1.0), 1e-9).unwrap();
        assert!((m.argmax - 0.3).abs() < 1e-8);
        assert!(m.max.abs() < 1e-15);
    }

    #[test]
    fn monotone_goes_to_boundary() {
        let m = maximize_1d(|r| r, (0.0, 1.0), 1e-9).unwrap();
        assert!(m.argmax < 1.0 && m.argmax > 1.0 - 1e-8);
        let m = maximize_1d(|r| -r, (0.0, 1.0), 1e-9).unwrap();
        assert!(m.argmax > 0.0 && m.argmax < 1e-8);
    }

    #[test]
    fn endpoints_never_evaluated() {
        let m = maximize_1d(
            |r| {
                assert!(r > 0.0 && r < 1.0);
                r.ln()
            },
            (0.0, 1.0),
            1e-10,
        )
        .unwrap();
        assert!(m.argmax > 1.0 - 1e-9);
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(maximize_1d(|x| x, (1.0, 0.0), 1e-6).is_err());
        assert!(maximize_1d(|x| x, (0.0, 1.0), 0.0).is_err());
    }
}
