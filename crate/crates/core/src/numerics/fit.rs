use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MIN_POINTS: usize = 8;

/// Least-squares line through transformed data.
///
/// For [`fit_exponent`] the line is `ln y = exponent * ln tau + intercept`; for
/// [`fit_exponential_rate`] it is `ln y = exponent * tau + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub points: usize,
}

fn in_window(tau: f64, window: Option<(f64, f64)>) -> bool {
    window.is_none_or(|(a, b)| tau >= a && tau <= b)
}

/// Power-law exponent of `y(tau)` from a log-log regression.
pub fn fit_exponent(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<FitResult> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(tau, y) in points.iter().filter(|(t, _)| in_window(*t, window)) {
        if !(tau > 0.0) || !(y > 0.0) || !y.is_finite() || !tau.is_finite() {
            return Err(Error::Fit(format!(
                "log-log fit needs positive finite data, got ({tau}, {y})"
            )));
        }
        xs.push(tau.ln());
        ys.push(y.ln());
    }
    line_fit(&xs, &ys)
}

/// Exponential rate of `y(tau)` from a semi-log regression.
pub fn fit_exponential_rate(
    points: &[(f64, f64)],
    window: Option<(f64, f64)>,
) -> Result<FitResult> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(tau, y) in points.iter().filter(|(t, _)| in_window(*t, window)) {
        if !(y > 0.0) || !y.is_finite() || !tau.is_finite() {
            return Err(Error::Fit(format!(
                "semi-log fit needs positive finite data, got ({tau}, {y})"
            )));
        }
        xs.push(tau);
        ys.push(y.ln());
    }
    line_fit(&xs, &ys)
}

fn line_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    let n = xs.len();
    if n < MIN_POINTS {
        return Err(Error::Fit(format!(
            "need at least {MIN_POINTS} points in the fit window, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae are all identical".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(FitResult {
        exponent: slope,
        intercept,
        residual_rms: (rss / nf).sqrt(),
        points: n,
    })
}

/// Solves the overdetermined system `rows * c ≈ rhs` in the least-squares sense.
pub fn linear_least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m < n || n == 0 || rhs.len() != m {
        return Err(Error::Fit(format!(
            "least squares needs at least as many rows as unknowns ({m} x {n})"
        )));
    }
    let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(rhs);
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Fit(format!("least squares failed: {e}")))?;
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn exact_inverse_law() {
        let pts: Vec<_> = logspace(1.0, 4.0, 40)
            .into_iter()
            .map(|t| (t, 5.0 / t))
            .collect();
        let fit = fit_exponent(&pts, None).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-6);
        assert!((fit.intercept - 5f64.ln()).abs() < 1e-9);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn constant_has_zero_exponent() {
        let pts: Vec<_> = logspace(0.0, 3.0, 20)
            .into_iter()
            .map(|t| (t, 7.0))
            .collect();
        assert!(fit_exponent(&pts, None).unwrap().exponent.abs() < 1e-12);
    }

    #[test]
    fn window_filters_points() {
        let pts: Vec<_> = logspace(0.0, 5.0, 60)
            .into_iter()
            .map(|t| (t, if t < 100.0 { 1.0 } else { 1.0 / (t * t) }))
            .collect();
        let fit = fit_exponent(&pts, Some((100.0, 1e5))).unwrap();
        assert!((fit.exponent + 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_positive() {
        let mut pts: Vec<_> = (1..20).map(|i| (i as f64, 1.0)).collect();
        pts[3].1 = 0.0;
        assert!(fit_exponent(&pts, None).is_err());
        let pts: Vec<_> = (0..20).map(|i| (i as f64, 1.0)).collect();
        assert!(fit_exponent(&pts, None).is_err());
    }

    #[test]
    fn too_few_points() {
        let pts: Vec<_> = (1..5).map(|i| (i as f64, 1.0 / i as f64)).collect();
        assert!(fit_exponent(&pts, None).is_err());
    }

    #[test]
    fn exponential_rate() {
        let pts: Vec<_> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.5;
                (t, 3.0 * (1.7 * t).exp())
            })
            .collect();
        let fit = fit_exponential_rate(&pts, None).unwrap();
        assert!((fit.exponent - 1.7).abs() < 1e-10);
    }

    #[test]
    fn least_squares_recovers_coefficients() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![1.0, i as f64, (i * i) as f64])
            .collect();
        let rhs: Vec<f64> = (0..10)
            .map(|i| 2.0 - 0.5 * i as f64 + 0.25 * (i * i) as f64)
            .collect();
        let c = linear_least_squares(&rows, &rhs).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-10);
        assert!((c[1] + 0.5).abs() < 1e-10);
        assert!((c[2] - 0.25).abs() < 1e-10);
    }
}
