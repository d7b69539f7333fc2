//! Correlation coefficients induced by embedding constraints.
//!
//! A pair `(mu_1, sigma_1)` of the larger model is tied to a second mean by
//! `mu_2 = f(mu_1, sigma_1)`. Pulling the three-dimensional line element
//! `(dmu_1^2 + dmu_2^2 + 4 dsigma_1^2) / sigma_1^2` back through `f` gives an
//! induced metric with an off-diagonal term, whose normalised size is the
//! correlation coefficient `r`.
//!
//! For a linear constraint the coefficients are constants. For anything else
//! they are evaluated pointwise and the resulting `r` is local.

use serde::{Deserialize, Serialize};

use crate::manifold::guard_sigma;
use crate::numerics::{finite_diff, DiffOrder};
use crate::{Error, Result};

type Constraint = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// An embedding constraint `mu_2 = f(mu_1, sigma_1)`.
pub struct EmbeddingSpec {
    constraint: Box<Constraint>,
    linear_coeffs: Option<(f64, f64)>,
}

impl std::fmt::Debug for EmbeddingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingSpec")
            .field("linear_coeffs", &self.linear_coeffs)
            .finish_non_exhaustive()
    }
}

impl EmbeddingSpec {
    /// `mu_2 = a1 mu_1 + a2 sigma_1`.
    pub fn linear(a1: f64, a2: f64) -> Result<Self> {
        if !(a1.is_finite() && a2.is_finite()) {
            return Err(Error::invalid(
                "linear_coeffs",
                "coefficients must be finite",
            ));
        }
        Ok(EmbeddingSpec {
            constraint: Box::new(move |m, s| a1 * m + a2 * s),
            linear_coeffs: Some((a1, a2)),
        })
    }

    pub fn constant(c: f64) -> Self {
        EmbeddingSpec {
            constraint: Box::new(move |_, _| c),
            linear_coeffs: Some((0.0, 0.0)),
        }
    }

    pub fn nonlinear<F>(f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        EmbeddingSpec {
            constraint: Box::new(f),
            linear_coeffs: None,
        }
    }

    pub fn eval(&self, mu1: f64, sigma1: f64) -> f64 {
        (self.constraint)(mu1, sigma1)
    }

    pub fn linear_coeffs(&self) -> Option<(f64, f64)> {
        self.linear_coeffs
    }

    pub fn is_linear(&self) -> bool {
        self.linear_coeffs.is_some()
    }
}

/// Coefficients of the induced line element and the resulting correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InducedMetricReport {
    pub a_mumu: f64,
    pub a_musigma: f64,
    pub a_sigmasigma: f64,
    pub r: f64,
    /// True when the coefficients vary from point to point.
    pub local: bool,
}

fn check_partials(d_mu: f64, d_sigma: f64) -> Result<()> {
    if d_mu.is_finite() && d_sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "partials",
            "partial derivatives must be finite",
        ))
    }
}

/// `(A_mumu, A_musigma, A_sigmasigma)` from the partials of the constraint.
pub fn induced_coefficients(d_mu: f64, d_sigma: f64) -> Result<(f64, f64, f64)> {
    check_partials(d_mu, d_sigma)?;
    Ok((
        1.0 + d_mu * d_mu,
        d_mu * d_sigma,
        2.0 + 0.5 * d_sigma * d_sigma,
    ))
}

pub fn correlation_from_partials(d_mu: f64, d_sigma: f64) -> Result<f64> {
    let (amm, ams, ass) = induced_coefficients(d_mu, d_sigma)?;
    Ok(ams / (amm.sqrt() * ass.sqrt()))
}

/// Same as [`correlation_from_partials`] for `mu_2 = a1 mu_1 + a2 sigma_1`,
/// written in closed form.
pub fn correlation_from_linear(a1: f64, a2: f64) -> Result<f64> {
    check_partials(a1, a2)?;
    Ok(a1 * a2 / ((1.0 + a1 * a1).sqrt() * (2.0 + 0.5 * a2 * a2).sqrt()))
}

/// `(mu~, sigma~) = (sqrt(A_mumu) mu, sqrt(A_sigmasigma) sigma)`.
pub fn rescale_variables(
    mu1: f64,
    sigma1: f64,
    a_mumu: f64,
    a_sigmasigma: f64,
) -> Result<(f64, f64)> {
    if !(a_mumu > 0.0 && a_sigmasigma > 0.0) {
        return Err(Error::invalid(
            "coefficients",
            "diagonal coefficients must be positive",
        ));
    }
    Ok((a_mumu.sqrt() * mu1, a_sigmasigma.sqrt() * sigma1))
}

/// Central-difference partials of the constraint at `(mu_1, sigma_1)`.
pub fn constraint_partials(spec: &EmbeddingSpec, point: (f64, f64), h: f64) -> Result<(f64, f64)> {
    let (m, s) = point;
    let d_mu = finite_diff(|x| spec.eval(x, s), m, DiffOrder::First, h)?;
    let d_sigma = finite_diff(|x| spec.eval(m, x), s, DiffOrder::First, h)?;
    Ok((d_mu, d_sigma))
}

/// Numerically pulls the three-dimensional metric back to `(mu_1, sigma_1)`.
///
/// The pullback `J^T diag(1, 1, 4) J / sigma^2` is assembled from
/// finite-difference partials, then the induced coefficients are read off
/// after removing the `1/sigma^2` factor (and the overall factor 2 on the
/// `sigma sigma` entry).
pub fn pullback_metric_oracle(
    spec: &EmbeddingSpec,
    point: (f64, f64),
    h: f64,
) -> Result<InducedMetricReport> {
    guard_sigma(0.0, "sigma_1", point.1)?;
    let (p, q) = constraint_partials(spec, point, h)?;
    // Rows: d(mu_1, mu_2, sigma_1) / d(mu_1, sigma_1).
    let jac = nalgebra::Matrix3x2::new(1.0, 0.0, p, q, 0.0, 1.0);
    let ambient = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, 4.0));
    let s2 = point.1 * point.1;
    let pulled = jac.transpose() * (ambient / s2) * jac;
    let a_mumu = s2 * pulled[(0, 0)];
    let a_musigma = s2 * pulled[(0, 1)];
    let a_sigmasigma = 0.5 * s2 * pulled[(1, 1)];
    Ok(InducedMetricReport {
        a_mumu,
        a_musigma,
        a_sigmasigma,
        r: a_musigma / (a_mumu.sqrt() * a_sigmasigma.sqrt()),
        local: !spec.is_linear(),
    })
}

/// Analytic report for a spec with known linear coefficients, or the
/// oracle report otherwise.
pub fn analytic_report(spec: &EmbeddingSpec) -> Option<InducedMetricReport> {
    let (a1, a2) = spec.linear_coeffs()?;
    let (a_mumu, a_musigma, a_sigmasigma) = induced_coefficients(a1, a2).ok()?;
    Some(InducedMetricReport {
        a_mumu,
        a_musigma,
        a_sigmasigma,
        r: correlation_from_linear(a1, a2).ok()?,
        local: false,
    })
}

/// Applies the pair machinery independently to each `(mu_{2j-1}, sigma_{2j-1})`.
pub fn correlation_coefficients(
    specs: &[EmbeddingSpec],
    points: &[(f64, f64)],
    h: f64,
) -> Result<Vec<InducedMetricReport>> {
    if specs.len() != points.len() {
        return Err(Error::invalid("points", "need one point per constraint"));
    }
    specs
        .iter()
        .zip(points)
        .map(|(s, &p)| pullback_metric_oracle(s, p, h))
        .collect()
}
