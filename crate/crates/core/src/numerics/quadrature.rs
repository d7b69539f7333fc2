//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.

// Nodes and weights are tabulated to more digits than f64 holds.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

use super::ToleranceSpec;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // errors are finite by construction; ties broken on position for determinism
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                what: "quadrature integrand",
                x,
            })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = eval(center - dx)? + eval(center + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok(Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    })
}

/// Integrates `f` over `[a, b]`.
///
/// Stops once the summed error estimate is below
/// `max(abs_tol, rel_tol * |I|)`; `tol.max_steps` caps the number of
/// subintervals. Reversed bounds flip the sign.
pub fn quadrature<F: Fn(f64) -> f64>(
    f: F,
    interval: (f64, f64),
    tol: &ToleranceSpec,
) -> Result<f64> {
    quadrature_with_breaks(f, &[interval.0, interval.1], tol)
}

/// Like [`quadrature`] but starts from the given breakpoints (including both
/// ends). Useful when the integrand has structure concentrated in a small
/// part of a long interval.
pub fn quadrature_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    tol: &ToleranceSpec,
) -> Result<f64> {
    tol.validate()?;
    if breaks.len() < 2 || breaks.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "interval",
            "need at least two finite breakpoints",
        ));
    }
    let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
    if lo == hi {
        return Ok(0.0);
    }
    let sign = if hi < lo { -1.0 } else { 1.0 };
    let mut pts: Vec<f64> = breaks.to_vec();
    if sign < 0.0 {
        pts.reverse();
    }
    if pts.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("breaks", "must be monotone"));
    }
    pts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        let seg = gk15(&f, w[0], w[1])?;
        total += seg.value;
        total_err += seg.error;
        heap.push(seg);
    }
    while total_err > tol.abs_tol.max(tol.rel_tol * total.abs()) {
        if heap.len() >= tol.max_steps {
            return Err(Error::QuadratureFailure {
                estimate: sign * total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            return Err(Error::QuadratureFailure {
                estimate: sign * total,
                error: total_err,
            });
        }
        let left = gk15(&f, worst.a, mid)?;
        let right = gk15(&f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // recompute occasionally to avoid drift in the running sums
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(sign * segs.iter().map(|s| s.value).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceSpec {
        ToleranceSpec::new(1e-12, 1e-10, 1000).unwrap()
    }

    #[test]
    fn polynomial() {
        let v = quadrature(|x| x * x, (0.0, 1.0), &tol()).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_integrand() {
        assert_eq!(quadrature(|_| 0.0, (0.0, 1.0), &tol()).unwrap(), 0.0);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let v = quadrature(|x| x.exp(), (1.0, 0.0), &tol()).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand() {
        let v = quadrature(|x| 1.0 / (1e-4 + x * x), (-1.0, 1.0), &tol()).unwrap();
        let exact = 2.0 * (1.0 / 1e-4f64.sqrt()) * (1.0 / 1e-4f64.sqrt()).atan();
        assert!((v - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn breakpoints_resolve_transients() {
        let f = |t: f64| 1.0 - (-t).exp();
        let breaks = [0.0, 1.0, 10.0, 100.0, 1e5];
        let v = quadrature_with_breaks(f, &breaks, &tol()).unwrap();
        let exact = 1e5 - 1.0 + (-1e5f64).exp();
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn non_finite_rejected() {
        let r = quadrature(|x| 1.0 / x, (0.0, 1.0), &tol());
        assert!(matches!(r, Err(Error::NonFinite { .. })) || r.is_err());
        let r = quadrature(|_| f64::NAN, (0.0, 1.0), &tol());
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn linearity() {
        let t = tol();
        let f = |x: f64| x.sin();
        let g = |x: f64| (x * x).exp();
        let (a, b) = (2.5, -1.5);
        let lhs = quadrature(|x| a * f(x) + b * g(x), (0.0, 1.0), &t).unwrap();
        let rhs =
            a * quadrature(f, (0.0, 1.0), &t).unwrap() + b * quadrature(g, (0.0, 1.0), &t).unwrap();
        assert!((lhs - rhs).abs() < 2.0 * 1e-10);
    }
}
