//! Information geometric complexity `V(tau)` and entropy `S(tau) = log V`.
//!
//! Per pair, the explored volume is the time average of
//!
//! ```text
//! f(tau') = sqrt(2 - r^2) (A e^{-lambda tau'} + B e^{-2 lambda tau'})
//!                         / (C e^{-lambda tau'} + D e^{-2 lambda tau'})
//! ```
//!
//! with `A = xi`, `B = -4 lambda s`, `C = a1 xi`, `D = -4 lambda s a0` and
//! `s = sqrt(alpha_+ / 2 alpha_-)`. The closed form keeps only the leading
//! terms of the antiderivative and so drops the lower-limit constant; the
//! numeric path integrates over `[0, tau]` and therefore differs from it by
//! an exact `O(1/tau)` offset, see [`closed_minus_numeric_offset`].

use serde::{Deserialize, Serialize};

use crate::geodesics::closed_form_pair;
use crate::manifold::diagonalize;
use crate::numerics::{fit_exponent, quadrature, quadrature_with_breaks, FitResult, ToleranceSpec};
use crate::{CoordinateFrame, Error, ModelParams, PairParams, Result};

/// Coefficients `(A, B, C, D)` of the per-pair integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrandCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn integrand_coefficients(pair: PairParams) -> Result<IntegrandCoefficients> {
    check_pair(pair)?;
    let dg = diagonalize(pair.r)?;
    let s = dg.mu_scale();
    Ok(IntegrandCoefficients {
        a: pair.xi,
        b: -4.0 * pair.lambda * s,
        c: dg.a1 * pair.xi,
        d: -4.0 * pair.lambda * s * dg.a0,
    })
}

fn check_pair(pair: PairParams) -> Result<()> {
    ModelParams::single(pair.r, pair.lambda, pair.xi).map(|_| ())
}

/// `Sigma = C / D > 0`.
pub fn sigma_fn(r: f64, lambda: f64, xi: f64) -> Result<f64> {
    let k = integrand_coefficients(PairParams { r, lambda, xi })?;
    Ok(k.c / k.d)
}

/// `Lambda_1 = 2 r sqrt(2 - r^2) / (1 + sqrt(1 + 4 r^2))`, the saturation value of one pair.
pub fn lambda1(r: f64) -> Result<f64> {
    crate::manifold::check_r(r)?;
    Ok(2.0 * r * (2.0 - r * r).sqrt() / (1.0 + (1.0 + 4.0 * r * r).sqrt()))
}

/// `(Lambda_1, Lambda_2)` with
/// `Lambda_2 = sqrt((1 + 4 r^2)(2 - r^2)) / r * ln(Sigma) / lambda`.
pub fn lambda_constants(r: f64, lambda: f64, xi: f64) -> Result<(f64, f64)> {
    let sigma = sigma_fn(r, lambda, xi)?;
    let l2 = ((1.0 + 4.0 * r * r) * (2.0 - r * r)).sqrt() / r * sigma.ln() / lambda;
    Ok((lambda1(r)?, l2))
}

/// The coefficient of `ln(Sigma) / tau` in the closed-form volume, written as
/// `2r sqrt(2-r^2) / ((1+sqrt D) lambda) - 2r sqrt(2-r^2) / ((1-sqrt D) lambda)`.
pub fn closed_form_bracket(r: f64, lambda: f64) -> Result<f64> {
    crate::manifold::check_r(r)?;
    let sd = (1.0 + 4.0 * r * r).sqrt();
    let w = 2.0 * r * (2.0 - r * r).sqrt();
    Ok(w / ((1.0 + sd) * lambda) - w / ((1.0 - sd) * lambda))
}

/// Per-pair constants bundled for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityConstants {
    pub sigma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub bracket: f64,
}

pub fn complexity_constants(pair: PairParams) -> Result<ComplexityConstants> {
    let (lambda1, lambda2) = lambda_constants(pair.r, pair.lambda, pair.xi)?;
    Ok(ComplexityConstants {
        sigma: sigma_fn(pair.r, pair.lambda, pair.xi)?,
        lambda1,
        lambda2,
        bracket: closed_form_bracket(pair.r, pair.lambda)?,
    })
}

/// Per-pair integrand at `tau' >= 0`.
pub fn volume_integrand(tau_p: f64, pair: PairParams) -> Result<f64> {
    let k = integrand_coefficients(pair)?;
    integrand_with(&k, pair, tau_p)
}

fn integrand_with(k: &IntegrandCoefficients, pair: PairParams, tau_p: f64) -> Result<f64> {
    if !(tau_p >= 0.0) {
        return Err(Error::invalid("tau", "integrand needs tau' >= 0"));
    }
    // divide through by e^{-lambda tau'} so nothing underflows
    let u = (-pair.lambda * tau_p).exp();
    let den = k.c + k.d * u;
    if den == 0.0 {
        return Err(Error::NonFinite {
            what: "volume integrand denominator",
            x: tau_p,
        });
    }
    Ok((2.0 - pair.r * pair.r).sqrt() * (k.a + k.b * u) / den)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("tau", format!("tau = {tau} must be > 0")))
    }
}

/// Closed form `prod_k { Lambda_1 + bracket * ln(Sigma) / tau }`.
pub fn volume_closed_form(tau: f64, params: &ModelParams) -> Result<f64> {
    check_tau(tau)?;
    params
        .pairs()
        .map(|p| {
            let l1 = lambda1(p.r)?;
            let br = closed_form_bracket(p.r, p.lambda)?;
            Ok(l1 + br * sigma_fn(p.r, p.lambda, p.xi)?.ln() / tau)
        })
        .product()
}

/// Same value through `prod_k { Lambda_1 + Lambda_2 / tau }`.
pub fn volume_closed_form_lambda(tau: f64, params: &ModelParams) -> Result<f64> {
    check_tau(tau)?;
    params
        .pairs()
        .map(|p| {
            let (l1, l2) = lambda_constants(p.r, p.lambda, p.xi)?;
            Ok(l1 + l2 / tau)
        })
        .product()
}

/// Largest relative disagreement between the two closed-form displays over
/// a set of `tau` values.
pub fn closed_form_display_discrepancy(params: &ModelParams, taus: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in taus {
        let a = volume_closed_form(t, params)?;
        let b = volume_closed_form_lambda(t, params)?;
        worst = worst.max(((a - b) / b).abs());
    }
    Ok(worst)
}

/// Breakpoints `0, 1/(4 lambda), 1/(2 lambda), 1/lambda, 2/lambda, ...` up to `tau`:
/// the integrand's structure sits in the first few `1/lambda`.
fn log_breaks(tau: f64, lambda: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = 0.25 / lambda;
    while x < tau {
        b.push(x);
        x *= 2.0;
    }
    b.push(tau);
    b
}

/// `(1/tau) int_0^tau f(tau') dtau'` for one pair, by adaptive quadrature.
pub fn pair_time_average(tau: f64, pair: PairParams, tol: &ToleranceSpec) -> Result<f64> {
    check_tau(tau)?;
    let k = integrand_coefficients(pair)?;
    // quadrature needs an infallible integrand; tau' >= 0 holds on the grid
    let f = |t: f64| integrand_with(&k, pair, t).unwrap_or(f64::NAN);
    Ok(quadrature_with_breaks(f, &log_breaks(tau, pair.lambda), tol)? / tau)
}

/// Definite integral `(1/tau) int_0^tau f` from the exact antiderivative
/// `F = (A/C) t + (1/lambda)(A/C - B/D) ln((D + C e^{lambda t}) / (D e^{lambda t}))`.
pub fn pair_time_average_exact(tau: f64, pair: PairParams) -> Result<f64> {
    check_tau(tau)?;
    let k = integrand_coefficients(pair)?;
    let sigma = k.c / k.d;
    let coef = (k.a / k.c - k.b / k.d) / pair.lambda;
    let u = (-pair.lambda * tau).exp();
    // ln((D + C e^{lt}) / (D e^{lt})) = ln(Sigma + e^{-lt})
    let f_tau = k.a / k.c * tau + coef * (sigma + u).ln();
    let f_0 = coef * (sigma + 1.0).ln();
    Ok((2.0 - pair.r * pair.r).sqrt() * (f_tau - f_0) / tau)
}

/// `V(tau) = (1/tau) int_0^tau prod_k f_k(tau') dtau'` by adaptive quadrature.
pub fn volume_numeric(tau: f64, params: &ModelParams, tol: &ToleranceSpec) -> Result<f64> {
    params.validate()?;
    check_tau(tau)?;
    let coeffs = params
        .pairs()
        .map(|p| Ok((integrand_coefficients(p)?, p)))
        .collect::<Result<Vec<_>>>()?;
    let f = |t: f64| {
        coeffs
            .iter()
            .map(|(k, p)| integrand_with(k, *p, t).unwrap_or(f64::NAN))
            .product::<f64>()
    };
    let fastest = params.lambda.iter().copied().fold(0.0, f64::max);
    Ok(quadrature_with_breaks(f, &log_breaks(tau, fastest), tol)? / tau)
}

/// Product of per-pair time averages, the factorized reading of `V` that the
/// closed form follows. Equal to [`volume_numeric`] for one pair; for several
/// pairs the two differ at `O(1/tau)` and share the same limit.
pub fn volume_numeric_factorized(
    tau: f64,
    params: &ModelParams,
    tol: &ToleranceSpec,
) -> Result<f64> {
    params.validate()?;
    params
        .pairs()
        .map(|p| pair_time_average(tau, p, tol))
        .product()
}

/// `lim tau (V_closed - V_numeric)` for one pair: `bracket * ln(1 + Sigma)`.
/// This is the lower-limit constant the closed form leaves out.
pub fn closed_minus_numeric_offset(pair: PairParams) -> Result<f64> {
    let c = complexity_constants(pair)?;
    Ok(c.bracket * (1.0 + c.sigma).ln())
}

/// `S = sum_k log{Lambda_1 + bracket ln(Sigma) / tau}`.
pub fn ige(tau: f64, params: &ModelParams) -> Result<f64> {
    check_tau(tau)?;
    let mut s = 0.0;
    for p in params.pairs() {
        let v = lambda1(p.r)?
            + closed_form_bracket(p.r, p.lambda)? * sigma_fn(p.r, p.lambda, p.xi)?.ln() / tau;
        s += log_positive(v)?;
    }
    Ok(s)
}

/// `log v`, rejecting `v <= 0`.
pub fn log_positive(v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v.ln())
    } else {
        Err(Error::invalid(
            "volume",
            format!("entropy needs V > 0, got {v}"),
        ))
    }
}

/// `prod_k Lambda_1(r_k)`.
pub fn saturation(params: &ModelParams) -> Result<f64> {
    params.r.iter().map(|&r| lambda1(r)).product()
}

/// Power-law exponent of `|V - saturation|` over `window`.
pub fn decay_analysis(
    tau: &[f64],
    v: &[f64],
    saturation: f64,
    window: (f64, f64),
) -> Result<FitResult> {
    if tau.len() != v.len() {
        return Err(Error::invalid("curve", "tau and V lengths differ"));
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi >= 10.0 * lo) {
        return Err(Error::invalid("window", "need at least one decade of tau"));
    }
    let pts: Vec<(f64, f64)> = tau
        .iter()
        .zip(v)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, x)| (*t, (x - saturation).abs()))
        .collect();
    if pts.iter().any(|(_, d)| *d == 0.0) {
        return Err(Error::Fit(
            "V equals its saturation value inside the fit window".into(),
        ));
    }
    fit_exponent(&pts, None)
}

/// `V` and `S` along a grid, closed form and numeric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityCurve {
    pub tau: Vec<f64>,
    pub v_closed: Vec<f64>,
    pub v_numeric: Vec<f64>,
    /// `log V`; `None` where `V <= 0`, which happens at small `tau` when the
    /// integrand starts out negative.
    pub s_closed: Vec<Option<f64>>,
    pub s_numeric: Vec<Option<f64>>,
    pub saturation: f64,
    /// Fit of `|V_numeric - saturation|`, absent when the grid does not cover the window.
    pub fitted_decay: Option<FitResult>,
    /// Fit failures and non-positive volumes.
    pub warnings: Vec<String>,
}

/// Default decay-fit window.
pub const DECAY_WINDOW: (f64, f64) = (1e2, 1e4);

pub fn complexity_curve(
    params: &ModelParams,
    tau: &[f64],
    tol: &ToleranceSpec,
) -> Result<ComplexityCurve> {
    params.validate()?;
    let mut v_closed = Vec::with_capacity(tau.len());
    let mut v_numeric = Vec::with_capacity(tau.len());
    let mut s_closed = Vec::with_capacity(tau.len());
    let mut s_numeric = Vec::with_capacity(tau.len());
    for &t in tau {
        let vc = volume_closed_form(t, params)?;
        let vn = volume_numeric(t, params, tol)?;
        v_closed.push(vc);
        v_numeric.push(vn);
        s_closed.push(log_positive(vc).ok());
        s_numeric.push(log_positive(vn).ok());
    }
    let sat = saturation(params)?;
    let mut warnings = Vec::new();
    let nonpositive = v_numeric.iter().filter(|v| **v <= 0.0).count();
    if nonpositive > 0 {
        warnings.push(format!(
            "{nonpositive} grid points with V <= 0; entropy left empty there"
        ));
    }
    let fitted_decay = match decay_analysis(tau, &v_numeric, sat, DECAY_WINDOW) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("decay fit: {e}"));
            None
        }
    };
    Ok(ComplexityCurve {
        tau: tau.to_vec(),
        v_closed,
        v_numeric,
        s_closed,
        s_numeric,
        saturation: sat,
        fitted_decay,
        warnings,
    })
}

/// `n` log-spaced points on `[a, b]`, `a > 0`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.log10(), b.log10());
    (0..n)
        .map(|i| 10f64.powf(la + (lb - la) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Which determinant feeds the Fisher density in [`box_volume`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityForm {
    /// `sqrt(2 - r^2) / sigma`, from the printed determinant.
    Printed,
    /// `sqrt(2 - r^2) / sigma^2`, from the determinant of the block matrix.
    Matrix,
}

/// `int int sqrt(g) dmu dsigma` over the box spanned by the original-frame
/// closed-form path between `0` and `tau'`, by iterated quadrature. The box
/// uses ordered bounds because `mu(tau')` is not monotone.
pub fn box_volume(
    tau_p: f64,
    pair: PairParams,
    form: DensityForm,
    tol: &ToleranceSpec,
) -> Result<f64> {
    let start = closed_form_pair(0.0, pair, CoordinateFrame::Original)?.state;
    let end = closed_form_pair(tau_p, pair, CoordinateFrame::Original)?.state;
    let (s_lo, s_hi) = (start.sigma.min(end.sigma), start.sigma.max(end.sigma));
    if s_lo <= 0.0 {
        return Err(Error::invalid(
            "path",
            "original-frame sigma left the half plane",
        ));
    }
    let width = (end.mu - start.mu).abs();
    let w = (2.0 - pair.r * pair.r).sqrt();
    let density = |s: f64| match form {
        DensityForm::Printed => w / s,
        DensityForm::Matrix => w / (s * s),
    };
    // the density does not depend on mu, but integrate both directions anyway
    let inner = |s: f64| quadrature(|_| density(s), (0.0, width), tol).unwrap_or(f64::NAN);
    quadrature(inner, (s_lo, s_hi), tol)
}

/// Analytic value of [`box_volume`].
pub fn box_volume_analytic(tau_p: f64, pair: PairParams, form: DensityForm) -> Result<f64> {
    let start = closed_form_pair(0.0, pair, CoordinateFrame::Original)?.state;
    let end = closed_form_pair(tau_p, pair, CoordinateFrame::Original)?.state;
    let width = (end.mu - start.mu).abs();
    let w = (2.0 - pair.r * pair.r).sqrt();
    let (a, b) = (start.sigma.min(end.sigma), start.sigma.max(end.sigma));
    Ok(w * width
        * match form {
            DensityForm::Printed => (b / a).ln(),
            DensityForm::Matrix => 1.0 / a - 1.0 / b,
        })
}

/// Time average of the box volume, product over pairs. Reported next to the
/// integrand-based `V`; the two are different quantities and are not
/// reconciled.
pub fn volume_box(
    tau: f64,
    params: &ModelParams,
    form: DensityForm,
    tol: &ToleranceSpec,
) -> Result<f64> {
    check_tau(tau)?;
    params
        .pairs()
        .map(|p| {
            let f = |t: f64| box_volume_analytic(t, p, form).unwrap_or(f64::NAN);
            Ok(quadrature_with_breaks(f, &log_breaks(tau, p.lambda), tol)? / tau)
        })
        .product()
}
