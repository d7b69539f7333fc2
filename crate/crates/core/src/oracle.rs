//! Brute-force Riemannian geometry of an arbitrary metric field.
//!
//! Everything here is computed from nothing but point evaluations of
//! `g(x)`: connection coefficients by finite differences of the metric,
//! curvature by finite differences of those coefficients. It shares no
//! algebra with the closed forms in [`crate::manifold`] and exists to check
//! them.
//!
//! Derivatives use one Richardson step on top of the central difference in
//! [`crate::numerics::finite_diff`], which makes them fourth order.

use nalgebra::DMatrix;

use crate::numerics::{finite_diff, DiffOrder};
use crate::{Error, Result};

/// A metric field on an open subset of R^n.
pub trait MetricField {
    fn dim(&self) -> usize;
    fn metric(&self, x: &[f64]) -> DMatrix<f64>;
}

impl<F: Fn(&[f64]) -> DMatrix<f64>> MetricField for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        (self.1)(x)
    }
}

/// `Gamma^a_{bc}` stored as `[a][b][c]`.
pub type Connection = Vec<Vec<Vec<f64>>>;

/// `R^a_{bcd}` stored as `[a][b][c][d]`, with
/// `R^a_{bcd} = d_c G^a_{bd} - d_d G^a_{bc} + G^a_{ec} G^e_{bd} - G^a_{ed} G^e_{bc}`.
pub type Riemann = Vec<Vec<Vec<Vec<f64>>>>;

fn richardson<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> Result<f64> {
    let coarse = finite_diff(&f, x, DiffOrder::First, h)?;
    let fine = finite_diff(&f, x, DiffOrder::First, 0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn partial<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize, h: f64) -> Result<f64> {
    richardson(
        |t| {
            let mut z = x.to_vec();
            z[i] = t;
            f(&z)
        },
        x[i],
        h,
    )
}

fn inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    g.clone()
        .try_inverse()
        .ok_or_else(|| Error::invalid("metric", "metric is singular at the sample point"))
}

/// `d_k g_{ij}` as `[k]` -> matrix.
fn metric_derivatives<M: MetricField>(m: &M, x: &[f64], h: f64) -> Result<Vec<DMatrix<f64>>> {
    let n = m.dim();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = partial(|z| m.metric(z)[(i, j)], x, k, h)?;
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        out.push(d);
    }
    Ok(out)
}

/// Levi-Civita connection by finite differences of the metric.
pub fn christoffels<M: MetricField>(m: &M, x: &[f64], h: f64) -> Result<Connection> {
    let n = m.dim();
    let ginv = inverse(&m.metric(x))?;
    let dg = metric_derivatives(m, x, h)?;
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += ginv[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
                }
                gamma[a][b][c] = 0.5 * s;
                gamma[a][c][b] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

/// `d_k Gamma^a_{bc}` as `[k][a][b][c]`.
pub fn christoffel_derivatives<M: MetricField>(
    m: &M,
    x: &[f64],
    h: f64,
) -> Result<Vec<Connection>> {
    let n = m.dim();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let eval = |t: f64| -> Result<Connection> {
            let mut z = x.to_vec();
            z[k] = t;
            christoffels(m, &z, h)
        };
        let (p1, m1) = (eval(x[k] + h)?, eval(x[k] - h)?);
        let (p2, m2) = (eval(x[k] + 0.5 * h)?, eval(x[k] - 0.5 * h)?);
        let mut d = vec![vec![vec![0.0; n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let coarse = (p1[a][b][c] - m1[a][b][c]) / (2.0 * h);
                    let fine = (p2[a][b][c] - m2[a][b][c]) / h;
                    d[a][b][c] = (4.0 * fine - coarse) / 3.0;
                }
            }
        }
        out.push(d);
    }
    Ok(out)
}

pub fn riemann<M: MetricField>(m: &M, x: &[f64], h: f64) -> Result<Riemann> {
    let n = m.dim();
    let g = christoffels(m, x, h)?;
    let dg = christoffel_derivatives(m, x, h)?;
    let mut r = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dg[c][a][b][d] - dg[d][a][b][c];
                    for e in 0..n {
                        v += g[a][e][c] * g[e][b][d] - g[a][e][d] * g[e][b][c];
                    }
                    r[a][b][c][d] = v;
                }
            }
        }
    }
    Ok(r)
}

/// `R_{abcd} = g_{ae} R^e_{bcd}`.
pub fn lower_riemann<M: MetricField>(m: &M, x: &[f64], r: &Riemann) -> Riemann {
    let n = m.dim();
    let g = m.metric(x);
    let mut out = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    out[a][b][c][d] = (0..n).map(|e| g[(a, e)] * r[e][b][c][d]).sum();
                }
            }
        }
    }
    out
}

/// Ricci scalar `g^{bd} R^a_{bad}`.
pub fn ricci_scalar<M: MetricField>(m: &M, x: &[f64], h: f64) -> Result<f64> {
    let n = m.dim();
    let r = riemann(m, x, h)?;
    let ginv = inverse(&m.metric(x))?;
    let mut s = 0.0;
    for b in 0..n {
        for d in 0..n {
            let ric: f64 = (0..n).map(|a| r[a][b][a][d]).sum();
            s += ginv[(b, d)] * ric;
        }
    }
    Ok(s)
}

/// Geodesic acceleration `-Gamma^a_{bc} v^b v^c`.
pub fn geodesic_acceleration<M: MetricField>(
    m: &M,
    x: &[f64],
    v: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let n = m.dim();
    let g = christoffels(m, x, h)?;
    Ok((0..n)
        .map(|a| {
            let mut s = 0.0;
            for b in 0..n {
                for c in 0..n {
                    s += g[a][b][c] * v[b] * v[c];
                }
            }
            -s
        })
        .collect())
}

/// The full block-diagonal Fisher–Rao metric of the embedded model in
/// original coordinates `(mu_1, sigma_1, ...)`.
pub struct BlockMetric {
    pub r: Vec<f64>,
}

impl MetricField for BlockMetric {
    fn dim(&self) -> usize {
        2 * self.r.len()
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for (k, &r) in self.r.iter().enumerate() {
            let s2 = x[2 * k + 1] * x[2 * k + 1];
            g[(2 * k, 2 * k)] = 1.0 / s2;
            g[(2 * k, 2 * k + 1)] = r / s2;
            g[(2 * k + 1, 2 * k)] = r / s2;
            g[(2 * k + 1, 2 * k + 1)] = 2.0 / s2;
        }
        g
    }
}

/// The asymptotic diagonal metric of one pair in tilde coordinates,
/// `diag(alpha_-, alpha_+) / (a1 sigma~)^2`, written out from the raw
/// eigenvalue formulas.
pub struct AsymptoticPairMetric {
    pub r: f64,
}

impl MetricField for AsymptoticPairMetric {
    fn dim(&self) -> usize {
        2
    }
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let r = self.r;
        let sd = (1.0 + 4.0 * r * r).sqrt();
        let a1 = (1.0 + sd) / (2.0 * r);
        let w = (a1 * x[1]).powi(2);
        DMatrix::from_row_slice(
            2,
            2,
            &[0.5 * (3.0 - sd) / w, 0.0, 0.0, 0.5 * (3.0 + sd) / w],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Round sphere of radius 2 in (theta, phi): scalar curvature 2/R^2.
    struct Sphere;
    impl MetricField for Sphere {
        fn dim(&self) -> usize {
            2
        }
        fn metric(&self, x: &[f64]) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 4.0 * x[0].sin().powi(2)])
        }
    }

    /// Poincare half plane dx^2 + dy^2 over y^2: scalar curvature -2.
    struct HalfPlane;
    impl MetricField for HalfPlane {
        fn dim(&self) -> usize {
            2
        }
        fn metric(&self, x: &[f64]) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[1.0 / (x[1] * x[1]), 0.0, 0.0, 1.0 / (x[1] * x[1])])
        }
    }

    #[test]
    fn sphere_curvature() {
        let s = ricci_scalar(&Sphere, &[1.0, 0.3], 1e-3).unwrap();
        assert!((s - 0.5).abs() < 1e-7, "{s}");
    }

    #[test]
    fn half_plane_curvature_and_connection() {
        let x = [0.2, 1.5];
        let s = ricci_scalar(&HalfPlane, &x, 1e-3).unwrap();
        assert!((s + 2.0).abs() < 1e-7, "{s}");
        let g = christoffels(&HalfPlane, &x, 1e-4).unwrap();
        assert!((g[0][0][1] + 1.0 / 1.5).abs() < 1e-10);
        assert!((g[1][0][0] - 1.0 / 1.5).abs() < 1e-10);
        assert!((g[1][1][1] + 1.0 / 1.5).abs() < 1e-10);
    }

    #[test]
    fn closure_metric_field() {
        let flat = (2usize, |_: &[f64]| DMatrix::<f64>::identity(2, 2));
        assert_eq!(ricci_scalar(&flat, &[0.0, 0.0], 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn block_metric_uncorrelated_curvature() {
        let m = BlockMetric { r: vec![0.0] };
        let s = ricci_scalar(&m, &[0.3, 1.2], 1e-3).unwrap();
        assert!((s + 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn singular_metric_rejected() {
        let z = (2usize, |_: &[f64]| DMatrix::<f64>::zeros(2, 2));
        assert!(christoffels(&z, &[0.0, 0.0], 1e-3).is_err());
    }
}
