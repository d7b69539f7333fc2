//! Fisher–Rao geometry of the embedded 2l-dimensional Gaussian model.
//!
//! Coordinates are ordered `(mu_1, sigma_1, ..., mu_l, sigma_l)`. The metric
//! is block diagonal with one 2x2 block per `(mu_k, sigma_k)` pair,
//!
//! ```text
//! M_k = (1 / sigma_k^2) [[1, r_k], [r_k, 2]]
//! ```
//!
//! so every quantity here is computed pair by pair. The full `2l x 2l`
//! matrix only appears in [`matrix_metric_determinant`] and in the oracle
//! module.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SINGULARITY_GUARD};

/// Model parameters: one correlation coefficient, rate and integration
/// constant per `(mu, sigma)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub r: Vec<f64>,
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Parameters of a single pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub r: f64,
    pub lambda: f64,
    pub xi: f64,
}

impl ModelParams {
    pub fn new(r: Vec<f64>, lambda: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        let p = ModelParams { r, lambda, xi };
        p.validate()?;
        Ok(p)
    }

    /// `l` identical pairs.
    pub fn uniform(l: usize, r: f64, lambda: f64, xi: f64) -> Result<Self> {
        Self::new(vec![r; l], vec![lambda; l], vec![xi; l])
    }

    pub fn single(r: f64, lambda: f64, xi: f64) -> Result<Self> {
        Self::uniform(1, r, lambda, xi)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.r.len();
        if l == 0 {
            return Err(Error::invalid("l", "need at least one (mu, sigma) pair"));
        }
        if self.lambda.len() != l || self.xi.len() != l {
            return Err(Error::invalid(
                "params",
                format!(
                    "r, lambda and xi must all have length l = {l} (got {}, {})",
                    self.lambda.len(),
                    self.xi.len()
                ),
            ));
        }
        for (k, &r) in self.r.iter().enumerate() {
            check_r(r).map_err(|_| Error::invalid("r", format!("r out of (0,1): r[{k}] = {r}")))?;
        }
        for (k, &v) in self.lambda.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    "lambda",
                    format!("lambda[{k}] = {v} must be > 0"),
                ));
            }
        }
        for (k, &v) in self.xi.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("xi", format!("xi[{k}] = {v} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn l(&self) -> usize {
        self.r.len()
    }

    pub fn pair(&self, k: usize) -> PairParams {
        PairParams {
            r: self.r[k],
            lambda: self.lambda[k],
            xi: self.xi[k],
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = PairParams> + '_ {
        (0..self.l()).map(|k| self.pair(k))
    }

    pub fn diagonalization(&self) -> Result<DiagonalizationBundle> {
        DiagonalizationBundle::new(&self.r)
    }
}

/// Which set of variables a point or state is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateFrame {
    /// `(mu, sigma)`.
    Original,
    /// Eigenbasis coordinates `(mu~, sigma~)` with `(mu, sigma) = E (mu~, sigma~)`.
    Tilde,
    /// `(mu', sigma')` with `mu' = sqrt(2 alpha_- / alpha_+) mu~`, `sigma' = sigma~`.
    Primed,
}

impl std::fmt::Display for CoordinateFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoordinateFrame::Original => "original",
            CoordinateFrame::Tilde => "tilde",
            CoordinateFrame::Primed => "primed",
        })
    }
}

/// A macrostate: `2l` coordinates `(mu_1, sigma_1, ..., mu_l, sigma_l)` in some frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub frame: CoordinateFrame,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(frame: CoordinateFrame, coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || !coords.len().is_multiple_of(2) {
            return Err(Error::invalid(
                "coords",
                "need an even, non-zero number of coordinates",
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coords", "coordinates must be finite"));
        }
        let p = Point { frame, coords };
        if frame != CoordinateFrame::Tilde {
            for k in 0..p.l() {
                check_sigma(p.sigma(k))?;
            }
        }
        Ok(p)
    }

    pub fn l(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.coords[2 * k]
    }

    pub fn sigma(&self, k: usize) -> f64 {
        self.coords[2 * k + 1]
    }
}

/// Whether `r = 0` may be passed to the metric-block operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationDomain {
    /// `0 < r < 1`.
    Open,
    /// `0 <= r < 1`: the uncorrelated limit is allowed.
    WithUncorrelatedLimit,
}

pub(crate) fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("r", format!("r out of (0,1): r = {r}")))
    }
}

fn check_r_domain(r: f64, domain: CorrelationDomain) -> Result<()> {
    match domain {
        CorrelationDomain::Open => check_r(r),
        CorrelationDomain::WithUncorrelatedLimit if r == 0.0 => Ok(()),
        CorrelationDomain::WithUncorrelatedLimit => check_r(r),
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "sigma",
            format!("sigma = {sigma} must be > 0"),
        ))
    }
}

/// `M = (1/sigma^2) [[1, r], [r, 2]]`.
pub fn metric_block(r: f64, sigma: f64, domain: CorrelationDomain) -> Result<Matrix2<f64>> {
    check_r_domain(r, domain)?;
    check_sigma(sigma)?;
    Ok(Matrix2::new(1.0, r, r, 2.0) / (sigma * sigma))
}

/// `M^-1 = sigma^2 / (2 - r^2) [[2, -r], [-r, 1]]`.
pub fn metric_block_inverse(r: f64, sigma: f64, domain: CorrelationDomain) -> Result<Matrix2<f64>> {
    check_r_domain(r, domain)?;
    check_sigma(sigma)?;
    Ok(Matrix2::new(2.0, -r, -r, 1.0) * (sigma * sigma / (2.0 - r * r)))
}

fn point_sigmas(params: &ModelParams, point: &Point) -> Result<Vec<f64>> {
    if point.frame != CoordinateFrame::Original {
        return Err(Error::invalid(
            "point",
            "determinants need an original-frame point",
        ));
    }
    if point.l() != params.l() {
        return Err(Error::invalid("point", "dimension does not match params"));
    }
    (0..point.l())
        .map(|k| {
            let s = point.sigma(k);
            check_sigma(s).map(|_| s)
        })
        .collect()
}

/// `prod_k (2 - r_k^2) / sigma_k^2`, the determinant used downstream in the
/// volume computations.
///
/// This is *not* the determinant of the assembled block metric (which has
/// `sigma_k^4` in the denominator); see [`matrix_metric_determinant`].
pub fn paper_metric_determinant(params: &ModelParams, point: &Point) -> Result<f64> {
    let sigmas = point_sigmas(params, point)?;
    Ok(params
        .r
        .iter()
        .zip(&sigmas)
        .map(|(r, s)| (2.0 - r * r) / (s * s))
        .product())
}

/// Determinant of the full `2l x 2l` block-diagonal metric, computed by LU
/// on the assembled matrix.
pub fn matrix_metric_determinant(params: &ModelParams, point: &Point) -> Result<f64> {
    let sigmas = point_sigmas(params, point)?;
    let n = 2 * params.l();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for (k, (&r, &s)) in params.r.iter().zip(&sigmas).enumerate() {
        let block = metric_block(r, s, CorrelationDomain::Open)?;
        g.fixed_view_mut::<2, 2>(2 * k, 2 * k).copy_from(&block);
    }
    Ok(g.determinant())
}

/// Scalar curvature `-2 sum_k 1 / (2 - r_k^2)`; accepts `r_k = 0`.
pub fn scalar_curvature(r: &[f64]) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::invalid("r", "need at least one pair"));
    }
    let mut total = 0.0;
    for &rk in r {
        check_r_domain(rk, CorrelationDomain::WithUncorrelatedLimit)?;
        total += 1.0 / (2.0 - rk * rk);
    }
    Ok(-2.0 * total)
}

/// Eigen-decomposition of `sigma^2 M` for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDiagonalization {
    pub r: f64,
    /// `1 + 4 r^2`
    pub delta: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    /// `(1 - sqrt(delta)) / (2r)`, negative.
    pub a0: f64,
    /// `(1 + sqrt(delta)) / (2r)`, positive.
    pub a1: f64,
}

/// Ratio `alpha_- / alpha_+` in the uncorrelated limit `r -> 0`.
pub const UNCORRELATED_ALPHA_RATIO: f64 = 0.5;

/// Diagonalises the pair block for `0 < r < 1`.
///
/// `r = 0` is rejected: `a0` and `a1` are `0/0` there, and the uncorrelated
/// model is handled through [`UNCORRELATED_ALPHA_RATIO`] instead.
pub fn diagonalize(r: f64) -> Result<PairDiagonalization> {
    check_r(r)?;
    let delta = 1.0 + 4.0 * r * r;
    let sd = delta.sqrt();
    Ok(PairDiagonalization {
        r,
        delta,
        alpha_plus: 0.5 * (3.0 + sd),
        alpha_minus: 0.5 * (3.0 - sd),
        a0: (1.0 - sd) / (2.0 * r),
        a1: (1.0 + sd) / (2.0 * r),
    })
}

impl PairDiagonalization {
    /// Columns are the eigenvectors `(1, a0)` (for `alpha_-`) and `(1, a1)` (for `alpha_+`).
    pub fn e(&self) -> Matrix2<f64> {
        Matrix2::new(1.0, 1.0, self.a0, self.a1)
    }

    pub fn e_inv(&self) -> Matrix2<f64> {
        let det = self.a1 - self.a0;
        Matrix2::new(self.a1, -1.0, -self.a0, 1.0) / det
    }

    /// Diagonal block `diag(alpha_-, alpha_+) / sigma^2`.
    pub fn d_block(&self, sigma: f64) -> Result<Matrix2<f64>> {
        check_sigma(sigma)?;
        Ok(Matrix2::new(self.alpha_minus, 0.0, 0.0, self.alpha_plus) / (sigma * sigma))
    }

    pub fn alpha_ratio(&self) -> f64 {
        self.alpha_minus / self.alpha_plus
    }

    /// `sqrt(alpha_+ / (2 alpha_-))`, the factor with `mu~ = mu_scale * mu'`.
    pub fn mu_scale(&self) -> f64 {
        (self.alpha_plus / (2.0 * self.alpha_minus)).sqrt()
    }

    pub fn tilde_to_original(&self, mu_t: f64, sigma_t: f64) -> (f64, f64) {
        (mu_t + sigma_t, self.a0 * mu_t + self.a1 * sigma_t)
    }

    pub fn original_to_tilde(&self, mu: f64, sigma: f64) -> (f64, f64) {
        let det = self.a1 - self.a0;
        ((self.a1 * mu - sigma) / det, (sigma - self.a0 * mu) / det)
    }

    pub fn primed_to_tilde(&self, mu_p: f64, sigma_p: f64) -> (f64, f64) {
        (self.mu_scale() * mu_p, sigma_p)
    }

    pub fn tilde_to_primed(&self, mu_t: f64, sigma_t: f64) -> (f64, f64) {
        (mu_t / self.mu_scale(), sigma_t)
    }

    /// Linear map between frames; also valid for velocities and Jacobi
    /// components because the changes of variables are linear.
    pub fn convert(&self, from: CoordinateFrame, to: CoordinateFrame, v: (f64, f64)) -> (f64, f64) {
        use CoordinateFrame::*;
        let tilde = match from {
            Original => self.original_to_tilde(v.0, v.1),
            Tilde => v,
            Primed => self.primed_to_tilde(v.0, v.1),
        };
        match to {
            Original => self.tilde_to_original(tilde.0, tilde.1),
            Tilde => tilde,
            Primed => self.tilde_to_primed(tilde.0, tilde.1),
        }
    }
}

/// Per-pair diagonalisation data for a whole model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalizationBundle {
    pub pairs: Vec<PairDiagonalization>,
}

impl DiagonalizationBundle {
    pub fn new(r: &[f64]) -> Result<Self> {
        Ok(DiagonalizationBundle {
            pairs: r.iter().map(|&rk| diagonalize(rk)).collect::<Result<_>>()?,
        })
    }

    pub fn l(&self) -> usize {
        self.pairs.len()
    }
}

/// Maps `point` into `target`. Fails if the mapped scale coordinate is not
/// positive in a frame that requires it.
pub fn frame_transform(
    point: &Point,
    target: CoordinateFrame,
    bundle: &DiagonalizationBundle,
) -> Result<Point> {
    if point.l() != bundle.l() {
        return Err(Error::invalid(
            "point",
            "dimension does not match the diagonalisation",
        ));
    }
    if point.frame == CoordinateFrame::Tilde {
        for (k, d) in bundle.pairs.iter().enumerate() {
            if d.a0 * point.mu(k) + d.a1 * point.sigma(k) <= 0.0 {
                return Err(Error::invalid(
                    "point",
                    format!("tilde pair {k} maps to a non-positive sigma"),
                ));
            }
        }
    }
    let mut coords = Vec::with_capacity(point.coords.len());
    for (k, d) in bundle.pairs.iter().enumerate() {
        let (m, s) = d.convert(point.frame, target, (point.mu(k), point.sigma(k)));
        coords.push(m);
        coords.push(s);
    }
    match target {
        CoordinateFrame::Tilde => {
            for (k, d) in bundle.pairs.iter().enumerate() {
                if d.a0 * coords[2 * k] + d.a1 * coords[2 * k + 1] <= 0.0 {
                    return Err(Error::invalid(
                        "point",
                        format!("tilde pair {k} maps to a non-positive sigma"),
                    ));
                }
            }
            Ok(Point {
                frame: target,
                coords,
            })
        }
        _ => Point::new(target, coords),
    }
}

/// Non-zero connection coefficients of the asymptotic diagonal metric
/// `(alpha_-/a1^2) dmu~^2 / sigma~^2 + (alpha_+/a1^2) dsigma~^2 / sigma~^2`.
///
/// Index 1 is `mu~`, index 2 is `sigma~`; `gamma1_12 = gamma1_21`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticChristoffels {
    pub gamma1_12: f64,
    pub gamma2_11: f64,
    pub gamma2_22: f64,
}

fn check_sigma_tilde(sigma_t: f64) -> Result<()> {
    if sigma_t > 0.0 && sigma_t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "sigma_tilde",
            format!("sigma~ = {sigma_t} must be > 0"),
        ))
    }
}

/// Diagonal components `(g_11, g_22)` of the asymptotic metric.
pub fn asymptotic_metric(r: f64, sigma_t: f64) -> Result<(f64, f64)> {
    check_sigma_tilde(sigma_t)?;
    let d = diagonalize(r)?;
    let s2 = sigma_t * sigma_t * d.a1 * d.a1;
    Ok((d.alpha_minus / s2, d.alpha_plus / s2))
}

pub fn christoffels_asymptotic(r: f64, sigma_t: f64) -> Result<AsymptoticChristoffels> {
    check_sigma_tilde(sigma_t)?;
    let d = diagonalize(r)?;
    Ok(AsymptoticChristoffels {
        gamma1_12: -1.0 / sigma_t,
        gamma2_11: d.alpha_ratio() / sigma_t,
        gamma2_22: -1.0 / sigma_t,
    })
}

/// `d/dsigma~` of the three symbols (none depend on `mu~`).
pub fn christoffel_sigma_derivatives(r: f64, sigma_t: f64) -> Result<AsymptoticChristoffels> {
    check_sigma_tilde(sigma_t)?;
    let d = diagonalize(r)?;
    let s2 = sigma_t * sigma_t;
    Ok(AsymptoticChristoffels {
        gamma1_12: 1.0 / s2,
        gamma2_11: -d.alpha_ratio() / s2,
        gamma2_22: 1.0 / s2,
    })
}

/// Fully covariant `R_1212 = -(alpha_-/a1^2) / sigma~^4` of the asymptotic metric.
///
/// Equivalently `R_1212 / g_11 = -1 / sigma~^2`, the combination that enters the
/// expanded deviation equations.
pub fn riemann_1212_asymptotic(r: f64, sigma_t: f64) -> Result<f64> {
    check_sigma_tilde(sigma_t)?;
    let d = diagonalize(r)?;
    Ok(-(d.alpha_minus / (d.a1 * d.a1)) / sigma_t.powi(4))
}

/// The published closed form `-(alpha_-/a1^2) / sigma~^2`. It coincides with
/// [`riemann_1212_asymptotic`] only at `sigma~ = 1`; kept for reporting.
pub fn riemann_1212_printed(r: f64, sigma_t: f64) -> Result<f64> {
    check_sigma_tilde(sigma_t)?;
    let d = diagonalize(r)?;
    Ok(-(d.alpha_minus / (d.a1 * d.a1)) / (sigma_t * sigma_t))
}

/// Curvature data of a model at given `sigma~` values (one per pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBundle {
    pub christoffels: Vec<AsymptoticChristoffels>,
    pub riemann_1212: Vec<f64>,
    pub riemann_1212_printed: Vec<f64>,
    pub scalar: f64,
}

pub fn curvature_bundle(params: &ModelParams, sigma_t: &[f64]) -> Result<CurvatureBundle> {
    if sigma_t.len() != params.l() {
        return Err(Error::invalid("sigma_tilde", "need one value per pair"));
    }
    let mut christoffels = Vec::new();
    let mut riemann = Vec::new();
    let mut printed = Vec::new();
    for (&r, &s) in params.r.iter().zip(sigma_t) {
        christoffels.push(christoffels_asymptotic(r, s)?);
        riemann.push(riemann_1212_asymptotic(r, s)?);
        printed.push(riemann_1212_printed(r, s)?);
    }
    Ok(CurvatureBundle {
        christoffels,
        riemann_1212: riemann,
        riemann_1212_printed: printed,
        scalar: scalar_curvature(&params.r)?,
    })
}

pub(crate) fn guard_sigma(tau: f64, what: &'static str, value: f64) -> Result<()> {
    if value <= SINGULARITY_GUARD || !value.is_finite() {
        Err(Error::Singularity { tau, what, value })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    #[test]
    fn metric_block_values() {
        let m = metric_block(0.0, 1.0, CorrelationDomain::WithUncorrelatedLimit).unwrap();
        assert_eq!(m, Matrix2::new(1.0, 0.0, 0.0, 2.0));
        let m = metric_block(0.5, 1.0, CorrelationDomain::Open).unwrap();
        assert_eq!(m, Matrix2::new(1.0, 0.5, 0.5, 2.0));
        let m = metric_block(0.5, 2.0, CorrelationDomain::Open).unwrap();
        assert_eq!(m, Matrix2::new(0.25, 0.125, 0.125, 0.5));
    }

    #[test]
    fn metric_block_errors() {
        assert!(metric_block(0.0, 1.0, CorrelationDomain::Open).is_err());
        assert!(metric_block(1.0, 1.0, CorrelationDomain::WithUncorrelatedLimit).is_err());
        assert!(metric_block(0.5, 0.0, CorrelationDomain::Open).is_err());
        assert!(metric_block(0.5, -1.0, CorrelationDomain::Open).is_err());
        assert!(metric_block(1.5, 1.0, CorrelationDomain::Open).is_err());
    }

    #[test]
    fn inverse_values() {
        let m = metric_block_inverse(0.0, 1.0, CorrelationDomain::WithUncorrelatedLimit).unwrap();
        assert_eq!(m, Matrix2::new(1.0, 0.0, 0.0, 0.5));
        let m = metric_block_inverse(0.5, 1.0, CorrelationDomain::Open).unwrap();
        assert_relative_eq!(
            m,
            Matrix2::new(2.0, -0.5, -0.5, 1.0) / 1.75,
            epsilon = 1e-15
        );
    }

    #[test]
    fn determinants() {
        let p = ModelParams::single(0.5, 1.0, 1.0).unwrap();
        let x = Point::new(CoordinateFrame::Original, vec![0.0, 1.0]).unwrap();
        assert_relative_eq!(
            paper_metric_determinant(&p, &x).unwrap(),
            1.75,
            epsilon = 1e-15
        );
        let x2 = Point::new(CoordinateFrame::Original, vec![0.0, 2.0]).unwrap();
        assert_relative_eq!(
            matrix_metric_determinant(&p, &x2).unwrap(),
            0.109375,
            epsilon = 1e-15
        );
        // the two differ by prod sigma^2
        let ratio = paper_metric_determinant(&p, &x2).unwrap()
            / matrix_metric_determinant(&p, &x2).unwrap();
        assert_relative_eq!(ratio, 4.0, epsilon = 1e-12);

        let p2 = ModelParams::uniform(2, 0.5, 1.0, 1.0).unwrap();
        let x = Point::new(CoordinateFrame::Original, vec![0.0, 1.0, 3.0, 2.0]).unwrap();
        assert_relative_eq!(
            paper_metric_determinant(&p2, &x).unwrap(),
            0.765625,
            epsilon = 1e-15
        );
    }

    #[test]
    fn determinant_needs_original_frame() {
        let p = ModelParams::single(0.5, 1.0, 1.0).unwrap();
        let x = Point::new(CoordinateFrame::Primed, vec![0.0, 1.0]).unwrap();
        assert!(paper_metric_determinant(&p, &x).is_err());
    }

    #[test]
    fn scalar_curvature_values() {
        assert_eq!(scalar_curvature(&[0.0, 0.0, 0.0]).unwrap(), -3.0);
        assert_relative_eq!(
            scalar_curvature(&[0.5]).unwrap(),
            -2.0 / 1.75,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            scalar_curvature(&[0.5, 0.5]).unwrap(),
            -4.0 / 1.75,
            epsilon = 1e-15
        );
        assert!(scalar_curvature(&[1.0]).is_err());
        assert!(scalar_curvature(&[]).is_err());
    }

    #[test]
    fn diagonalize_half() {
        let d = diagonalize(0.5).unwrap();
        let s2 = 2f64.sqrt();
        assert_relative_eq!(d.delta, 2.0, epsilon = 1e-15);
        assert_relative_eq!(d.alpha_plus, (3.0 + s2) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(d.alpha_minus, (3.0 - s2) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(d.a0, 1.0 - s2, epsilon = 1e-15);
        assert_relative_eq!(d.a1, 1.0 + s2, epsilon = 1e-15);
    }

    #[test]
    fn diagonalize_matches_numeric_eigensolve() {
        for i in 1..20 {
            let r = i as f64 / 20.0;
            let d = diagonalize(r).unwrap();
            let eig = SymmetricEigen::new(Matrix2::new(1.0, r, r, 2.0));
            let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1]];
            ev.sort_by(f64::total_cmp);
            assert_relative_eq!(ev[0], d.alpha_minus, epsilon = 1e-12);
            assert_relative_eq!(ev[1], d.alpha_plus, epsilon = 1e-12);
        }
    }

    #[test]
    fn diagonalize_rejects_zero() {
        assert!(diagonalize(0.0).is_err());
    }

    #[test]
    fn uncorrelated_limit_ratio() {
        let d = diagonalize(1e-6).unwrap();
        assert!((d.alpha_ratio() - UNCORRELATED_ALPHA_RATIO).abs() < 1e-11);
    }

    #[test]
    fn similarity_is_diagonal_on_grid() {
        for i in 1..=100 {
            let r = i as f64 / 101.0;
            let d = diagonalize(r).unwrap();
            let e = d.e();
            assert_relative_eq!(e * d.e_inv(), Matrix2::identity(), epsilon = 1e-12);
            let g = d.e_inv() * Matrix2::new(1.0, r, r, 2.0) * e;
            assert!(g[(0, 1)].abs() < 1e-10 && g[(1, 0)].abs() < 1e-10);
            assert!((g[(0, 0)] - d.alpha_minus).abs() < 1e-10);
            assert!((g[(1, 1)] - d.alpha_plus).abs() < 1e-10);
            let block = d.d_block(2.0).unwrap();
            assert_relative_eq!(block[(0, 0)], d.alpha_minus / 4.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn frame_examples() {
        let b = DiagonalizationBundle::new(&[0.5]).unwrap();
        let p = Point {
            frame: CoordinateFrame::Tilde,
            coords: vec![0.0, 1.0],
        };
        let o = frame_transform(&p, CoordinateFrame::Original, &b).unwrap();
        assert_relative_eq!(o.coords[0], 1.0);
        assert_relative_eq!(o.coords[1], 1.0 + 2f64.sqrt(), epsilon = 1e-15);

        let q = Point::new(CoordinateFrame::Primed, vec![0.0, 1.0]).unwrap();
        let t = frame_transform(&q, CoordinateFrame::Tilde, &b).unwrap();
        assert_eq!(t.coords, vec![0.0, 1.0]);
    }

    #[test]
    fn composed_map_matches_combined_display() {
        // mu = sqrt(a+/2a-) mu' + sigma',  sigma = a0 sqrt(a+/2a-) mu' + a1 sigma'
        let b = DiagonalizationBundle::new(&[0.5]).unwrap();
        let d = b.pairs[0];
        let q = Point::new(CoordinateFrame::Primed, vec![1.0, 1.0]).unwrap();
        let o = frame_transform(&q, CoordinateFrame::Original, &b).unwrap();
        let s = (d.alpha_plus / (2.0 * d.alpha_minus)).sqrt();
        assert_relative_eq!(o.coords[0], s + 1.0, epsilon = 1e-14);
        assert_relative_eq!(o.coords[1], d.a0 * s + d.a1, epsilon = 1e-14);
    }

    #[test]
    fn frame_rejects_negative_sigma() {
        let b = DiagonalizationBundle::new(&[0.5]).unwrap();
        let p = Point {
            frame: CoordinateFrame::Tilde,
            coords: vec![10.0, 1.0],
        };
        assert!(frame_transform(&p, CoordinateFrame::Original, &b).is_err());
    }

    #[test]
    fn christoffel_values() {
        let c = christoffels_asymptotic(0.5, 1.0).unwrap();
        let s2 = 2f64.sqrt();
        assert_eq!(c.gamma1_12, -1.0);
        assert_eq!(c.gamma2_22, -1.0);
        assert_relative_eq!(c.gamma2_11, (3.0 - s2) / (3.0 + s2), epsilon = 1e-15);
        let c2 = christoffels_asymptotic(0.5, 2.0).unwrap();
        assert_relative_eq!(c2.gamma2_11, c.gamma2_11 / 2.0, epsilon = 1e-15);
        assert_relative_eq!(c2.gamma1_12, -0.5);
        let small = christoffels_asymptotic(1e-7, 3.0).unwrap();
        assert!((small.gamma2_11 - 1.0 / 6.0).abs() < 1e-12);
        assert!(christoffels_asymptotic(0.5, 0.0).is_err());
    }

    #[test]
    fn riemann_values() {
        let v = riemann_1212_asymptotic(0.5, 1.0).unwrap();
        assert_relative_eq!(v, -0.1360389693210723, epsilon = 1e-13);
        assert_relative_eq!(riemann_1212_printed(0.5, 1.0).unwrap(), v);
        assert_relative_eq!(
            riemann_1212_asymptotic(0.5, 2.0).unwrap(),
            v / 16.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            riemann_1212_printed(0.5, 2.0).unwrap(),
            v / 4.0,
            epsilon = 1e-15
        );
        let (g11, _) = asymptotic_metric(0.5, 2.0).unwrap();
        assert_relative_eq!(
            riemann_1212_asymptotic(0.5, 2.0).unwrap() / g11,
            -0.25,
            epsilon = 1e-14
        );
    }

    #[test]
    fn params_validation_message() {
        let e = ModelParams::single(1.5, 1.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("r out of (0,1)"));
        assert!(ModelParams::new(vec![0.5], vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(ModelParams::single(0.5, 0.0, 1.0).is_err());
        assert!(ModelParams::single(0.5, 1.0, -1.0).is_err());
        assert!(ModelParams::new(vec![], vec![], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn block_is_spd_with_alpha_eigenvalues(r in 0.001f64..0.999, sigma in 0.01f64..100.0) {
            let m = metric_block(r, sigma, CorrelationDomain::Open).unwrap();
            let inv = metric_block_inverse(r, sigma, CorrelationDomain::Open).unwrap();
            let prod = m * inv;
            prop_assert!((prod - Matrix2::identity()).abs().max() < 1e-12);
            let d = diagonalize(r).unwrap();
            prop_assert!(d.alpha_minus > 0.0 && d.alpha_plus > 0.0);
            prop_assert!((d.alpha_plus + d.alpha_minus - 3.0).abs() < 1e-14);
            prop_assert!((d.alpha_plus * d.alpha_minus - (2.0 - r * r)).abs() < 1e-14);
            prop_assert!(d.a0 < 0.0 && d.a1 > 0.0);
        }

        #[test]
        fn original_tilde_round_trip(r in 0.01f64..0.99, mu in -5.0f64..5.0, sigma in 0.01f64..10.0) {
            let b = DiagonalizationBundle::new(&[r]).unwrap();
            let p = Point::new(CoordinateFrame::Original, vec![mu, sigma]).unwrap();
            let t = frame_transform(&p, CoordinateFrame::Tilde, &b).unwrap();
            let back = frame_transform(&t, CoordinateFrame::Original, &b).unwrap();
            prop_assert!((back.coords[0] - mu).abs() <= 1e-12 * (1.0 + mu.abs() + sigma));
            prop_assert!((back.coords[1] - sigma).abs() <= 1e-12 * (1.0 + mu.abs() + sigma));
            let q = frame_transform(&p, CoordinateFrame::Primed, &b);
            if let Ok(q) = q {
                let back = frame_transform(&q, CoordinateFrame::Original, &b).unwrap();
                prop_assert!((back.coords[0] - mu).abs() <= 1e-12 * (1.0 + mu.abs() + sigma));
            }
        }

        #[test]
        fn riemann_strictly_negative(r in 0.001f64..0.999, s in 0.01f64..50.0) {
            prop_assert!(riemann_1212_asymptotic(r, s).unwrap() < 0.0);
        }
    }
}
