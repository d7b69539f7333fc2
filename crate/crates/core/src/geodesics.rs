//! Geodesic flows in the original, tilde and primed frames.
//!
//! Every pair `(mu_k, sigma_k)` evolves independently of the others, so the
//! systems below are written per pair and the integrator treats each pair as
//! its own four-dimensional first-order problem.
//!
//! The tilde and primed systems are the geodesic equations of the asymptotic
//! diagonal metric. The original-frame system is the one of the full
//! correlated metric and is kept for completeness and oracle tests.

use serde::{Deserialize, Serialize};

use crate::manifold::{
    diagonalize, guard_sigma, CoordinateFrame, DiagonalizationBundle, PairDiagonalization,
};
use crate::numerics::{fit_exponential_rate, maximize_1d, ode_solve, FitResult, ToleranceSpec};
use crate::{Error, ModelParams, PairParams, Result};

/// Position and velocity of one `(mu, sigma)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairState {
    pub mu: f64,
    pub sigma: f64,
    pub mu_dot: f64,
    pub sigma_dot: f64,
}

impl PairState {
    pub fn new(mu: f64, sigma: f64, mu_dot: f64, sigma_dot: f64) -> Self {
        PairState {
            mu,
            sigma,
            mu_dot,
            sigma_dot,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.mu, self.sigma, self.mu_dot, self.sigma_dot]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        PairState::new(y[0], y[1], y[2], y[3])
    }

    /// Maps position and velocity between frames. The changes of variables
    /// are linear, so velocities transform like positions.
    pub fn convert(
        self,
        d: &PairDiagonalization,
        from: CoordinateFrame,
        to: CoordinateFrame,
    ) -> Self {
        let (mu, sigma) = d.convert(from, to, (self.mu, self.sigma));
        let (mu_dot, sigma_dot) = d.convert(from, to, (self.mu_dot, self.sigma_dot));
        PairState::new(mu, sigma, mu_dot, sigma_dot)
    }
}

/// Second derivatives `(mu'', sigma'')` of one pair.
pub type Acceleration = (f64, f64);

/// A full geodesic state: one [`PairState`] per pair, in a tagged frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub frame: CoordinateFrame,
    pub pairs: Vec<PairState>,
}

impl GeodesicState {
    pub fn new(frame: CoordinateFrame, pairs: Vec<PairState>) -> Result<Self> {
        let s = GeodesicState { frame, pairs };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::invalid("state", "need at least one pair"));
        }
        for p in &self.pairs {
            if p.to_array().iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(
                    "state",
                    "positions and velocities must be finite",
                ));
            }
            if self.frame != CoordinateFrame::Tilde && p.sigma <= 0.0 {
                return Err(Error::invalid(
                    "state",
                    format!(
                        "sigma = {} must be > 0 in the {} frame",
                        p.sigma, self.frame
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn l(&self) -> usize {
        self.pairs.len()
    }

    pub fn convert(&self, to: CoordinateFrame, bundle: &DiagonalizationBundle) -> Result<Self> {
        if bundle.l() != self.l() {
            return Err(Error::invalid(
                "state",
                "dimension does not match the diagonalisation",
            ));
        }
        let pairs = self
            .pairs
            .iter()
            .zip(&bundle.pairs)
            .map(|(p, d)| p.convert(d, self.frame, to))
            .collect();
        Ok(GeodesicState { frame: to, pairs })
    }
}

fn accel_original(r: f64, p: &PairState, tau: f64) -> Result<Acceleration> {
    guard_sigma(tau, "sigma", p.sigma)?;
    let w = 2.0 - r * r;
    let (m, s, s0) = (p.mu_dot, p.sigma_dot, p.sigma);
    let mu_dd = (r / w) * m * m / s0 + (4.0 / w) * m * s / s0 + (2.0 * r / w) * s * s / s0;
    let sigma_dd = -(1.0 / w) * m * m / s0
        - (2.0 * r / w) * m * s / s0
        - ((2.0 * r * r - 2.0) / w) * s * s / s0;
    Ok((mu_dd, sigma_dd))
}

fn accel_tilde(ratio: f64, p: &PairState, tau: f64) -> Result<Acceleration> {
    guard_sigma(tau, "sigma~", p.sigma)?;
    let (m, s, s0) = (p.mu_dot, p.sigma_dot, p.sigma);
    Ok((2.0 * m * s / s0, -ratio * m * m / s0 + s * s / s0))
}

fn accel_primed(p: &PairState, tau: f64) -> Result<Acceleration> {
    guard_sigma(tau, "sigma'", p.sigma)?;
    let (m, s, s0) = (p.mu_dot, p.sigma_dot, p.sigma);
    Ok((2.0 * m * s / s0, -m * m / (2.0 * s0) + s * s / s0))
}

/// Acceleration of one pair in `frame`. The tilde system needs `0 < r < 1`;
/// the original system also accepts the uncorrelated limit `r = 0`.
pub fn pair_acceleration(
    frame: CoordinateFrame,
    r: f64,
    p: &PairState,
    tau: f64,
) -> Result<Acceleration> {
    match frame {
        CoordinateFrame::Original => accel_original(r, p, tau),
        CoordinateFrame::Tilde => accel_tilde(diagonalize(r)?.alpha_ratio(), p, tau),
        CoordinateFrame::Primed => accel_primed(p, tau),
    }
}

fn rhs_checked(
    state: &GeodesicState,
    params: &ModelParams,
    frame: CoordinateFrame,
) -> Result<Vec<Acceleration>> {
    if state.frame != frame {
        return Err(Error::invalid(
            "state",
            format!("expected a {frame}-frame state"),
        ));
    }
    if state.l() != params.l() {
        return Err(Error::invalid("state", "dimension does not match params"));
    }
    state
        .pairs
        .iter()
        .zip(&params.r)
        .map(|(p, &r)| pair_acceleration(frame, r, p, f64::NAN))
        .collect()
}

/// Correlated geodesic equations in `(mu, sigma)`.
pub fn rhs_original(state: &GeodesicState, params: &ModelParams) -> Result<Vec<Acceleration>> {
    rhs_checked(state, params, CoordinateFrame::Original)
}

/// Geodesic equations of the asymptotic diagonal metric in `(mu~, sigma~)`.
pub fn rhs_diagonalized(state: &GeodesicState, params: &ModelParams) -> Result<Vec<Acceleration>> {
    rhs_checked(state, params, CoordinateFrame::Tilde)
}

/// Same equations after rescaling `mu~`; independent of `r`.
pub fn rhs_primed(state: &GeodesicState, params: &ModelParams) -> Result<Vec<Acceleration>> {
    rhs_checked(state, params, CoordinateFrame::Primed)
}

/// Closed-form primed geodesic and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormPoint {
    pub state: PairState,
    pub mu_ddot: f64,
    pub sigma_ddot: f64,
}

/// Primed-frame solution with integration constants `xi` and `lambda`:
///
/// ```text
/// mu'    = (xi^2 / 2 lambda) / (e^{-2 lambda tau} + K) - 4 lambda
/// sigma' = xi e^{-lambda tau} / (e^{-2 lambda tau} + K),   K = xi^2 / 8 lambda^2
/// ```
///
/// Since `4 lambda K = xi^2 / 2 lambda`, `mu'` is evaluated as the equivalent
/// `-4 lambda e^{-2 lambda tau} / (e^{-2 lambda tau} + K)`, which does not
/// cancel catastrophically as `tau` grows.
pub fn closed_form_primed(tau: f64, xi: f64, lambda: f64) -> ClosedFormPoint {
    let k = xi * xi / (8.0 * lambda * lambda);
    let u = (-lambda * tau).exp();
    let e = u * u;
    let q = e + k;
    let q2 = q * q;
    let q3 = q2 * q;
    ClosedFormPoint {
        state: PairState::new(
            -4.0 * lambda * e / q,
            xi * u / q,
            xi * xi * e / q2,
            xi * lambda * u * (e - k) / q2,
        ),
        mu_ddot: 2.0 * lambda * xi * xi * e * (e - k) / q3,
        sigma_ddot: xi * lambda * lambda * u * (e * e - 6.0 * e * k + k * k) / q3,
    }
}

/// Closed-form solution of one pair mapped into `frame`.
pub fn closed_form_pair(
    tau: f64,
    pair: PairParams,
    frame: CoordinateFrame,
) -> Result<ClosedFormPoint> {
    let p = closed_form_primed(tau, pair.xi, pair.lambda);
    if frame == CoordinateFrame::Primed {
        return Ok(p);
    }
    let d = diagonalize(pair.r)?;
    let state = p.state.convert(&d, CoordinateFrame::Primed, frame);
    let (mu_ddot, sigma_ddot) =
        d.convert(CoordinateFrame::Primed, frame, (p.mu_ddot, p.sigma_ddot));
    Ok(ClosedFormPoint {
        state,
        mu_ddot,
        sigma_ddot,
    })
}

/// `(mu_k, sigma_k)` of the closed-form geodesic in the original frame,
/// written out directly rather than through [`frame_transform`](crate::manifold::frame_transform).
pub fn closed_form_original(tau: f64, params: &ModelParams, k: usize) -> Result<(f64, f64)> {
    if k >= params.l() {
        return Err(Error::invalid("k", format!("pair index {k} out of range")));
    }
    let PairParams { r, lambda, xi } = params.pair(k);
    let sd = (1.0 + 4.0 * r * r).sqrt();
    let alpha_p = 0.5 * (3.0 + sd);
    let alpha_m = 0.5 * (3.0 - sd);
    let s = (alpha_p / (2.0 * alpha_m)).sqrt();
    let q = (-2.0 * lambda * tau).exp() + xi * xi / (8.0 * lambda * lambda);
    let mu_p = xi * xi / (2.0 * lambda) / q - 4.0 * lambda;
    let sigma_p = xi * (-lambda * tau).exp() / q;
    Ok((
        s * mu_p + sigma_p,
        (1.0 - sd) / (2.0 * r) * s * mu_p + (1.0 + sd) / (2.0 * r) * sigma_p,
    ))
}

/// Closed-form state of every pair at `tau`.
pub fn closed_form_state(
    tau: f64,
    params: &ModelParams,
    frame: CoordinateFrame,
) -> Result<GeodesicState> {
    let pairs = params
        .pairs()
        .map(|p| closed_form_pair(tau, p, frame).map(|c| c.state))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeodesicState { frame, pairs })
}

/// Largest absolute difference between the closed-form second derivatives
/// and the frame's geodesic right-hand side at `tau`.
///
/// The singularity guard is bypassed here: the closed form legitimately
/// reaches `sigma' < 1e-12` at large `lambda tau` and the residual is still
/// well defined there.
pub fn closed_form_residual(tau: f64, pair: PairParams, frame: CoordinateFrame) -> Result<f64> {
    let c = closed_form_pair(tau, pair, frame)?;
    let (a, b) = match frame {
        CoordinateFrame::Original => unguarded(
            accel_original(pair.r, &c.state, tau),
            &c.state,
            frame,
            pair.r,
        ),
        CoordinateFrame::Tilde => unguarded(
            accel_tilde(diagonalize(pair.r)?.alpha_ratio(), &c.state, tau),
            &c.state,
            frame,
            pair.r,
        ),
        CoordinateFrame::Primed => unguarded(accel_primed(&c.state, tau), &c.state, frame, pair.r),
    }?;
    Ok((c.mu_ddot - a).abs().max((c.sigma_ddot - b).abs()))
}

fn unguarded(
    res: Result<Acceleration>,
    p: &PairState,
    frame: CoordinateFrame,
    r: f64,
) -> Result<Acceleration> {
    match res {
        Err(Error::Singularity { .. }) if p.sigma > 0.0 => {
            // evaluate the same formulas on a rescaled copy: every system is
            // homogeneous of degree one under (mu, sigma, velocities) -> c(...)
            let c = 1.0 / p.sigma;
            let q = PairState::new(p.mu * c, 1.0, p.mu_dot * c, p.sigma_dot * c);
            let (a, b) = pair_acceleration(frame, r, &q, f64::NAN)?;
            Ok((a / c, b / c))
        }
        other => other,
    }
}

/// Squared speed `g_ij theta'^i theta'^j` of one pair.
///
/// The tilde and primed frames use the asymptotic diagonal metric, the
/// original frame the full correlated block.
pub fn pair_speed_squared(frame: CoordinateFrame, r: f64, p: &PairState) -> Result<f64> {
    let s2 = p.sigma * p.sigma;
    match frame {
        CoordinateFrame::Original => {
            let (m, s) = (p.mu_dot, p.sigma_dot);
            Ok((m * m + 2.0 * r * m * s + 2.0 * s * s) / s2)
        }
        CoordinateFrame::Tilde => {
            let d = diagonalize(r)?;
            Ok(
                (d.alpha_minus * p.mu_dot.powi(2) + d.alpha_plus * p.sigma_dot.powi(2))
                    / (d.a1 * d.a1 * s2),
            )
        }
        CoordinateFrame::Primed => {
            let d = diagonalize(r)?;
            Ok(d.alpha_plus * (0.5 * p.mu_dot.powi(2) + p.sigma_dot.powi(2)) / (d.a1 * d.a1 * s2))
        }
    }
}

/// A sampled geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: ModelParams,
    pub frame: CoordinateFrame,
    pub tau: Vec<f64>,
    pub states: Vec<GeodesicState>,
    pub tol: ToleranceSpec,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Per-pair series of one component: 0 = mu, 1 = sigma, 2 = mu', 3 = sigma'.
    pub fn series(&self, k: usize, component: usize) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s.pairs[k].to_array()[component])
            .collect()
    }

    pub fn convert(&self, to: CoordinateFrame) -> Result<Trajectory> {
        let bundle = self.params.diagonalization()?;
        let states = self
            .states
            .iter()
            .map(|s| s.convert(to, &bundle))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            frame: to,
            states,
            ..self.clone()
        })
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::invalid("tau_grid", "need at least two sample times"));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "tau_grid",
            "sample times must be finite and strictly increasing",
        ));
    }
    Ok(())
}

/// Integrates one pair from `grid[0]` and samples it on `grid`.
pub fn integrate_pair(
    frame: CoordinateFrame,
    r: f64,
    initial: PairState,
    grid: &[f64],
    tol: &ToleranceSpec,
) -> Result<(Vec<PairState>, usize, usize)> {
    check_grid(grid)?;
    // validate r once up front rather than inside every rhs call
    let ratio = match frame {
        CoordinateFrame::Tilde => diagonalize(r)?.alpha_ratio(),
        _ => 0.0,
    };
    let sol = ode_solve(
        |t, y, dy| {
            let p = PairState::from_slice(y);
            let (a, b) = match frame {
                CoordinateFrame::Original => accel_original(r, &p, t)?,
                CoordinateFrame::Tilde => accel_tilde(ratio, &p, t)?,
                CoordinateFrame::Primed => accel_primed(&p, t)?,
            };
            dy[0] = y[2];
            dy[1] = y[3];
            dy[2] = a;
            dy[3] = b;
            Ok(())
        },
        &initial.to_array(),
        (grid[0], grid[grid.len() - 1]),
        tol,
        Some(grid),
    )?;
    let states = sol.y.iter().map(|y| PairState::from_slice(y)).collect();
    Ok((states, sol.accepted_steps, sol.rejected_steps))
}

/// Numerically integrates the geodesic equations of `frame` from `initial`
/// (taken at `grid[0]`) and samples the solution on `grid`.
pub fn integrate_geodesic(
    params: &ModelParams,
    frame: CoordinateFrame,
    initial: &GeodesicState,
    grid: &[f64],
    tol: &ToleranceSpec,
) -> Result<Trajectory> {
    params.validate()?;
    initial.validate()?;
    if initial.frame != frame {
        return Err(Error::invalid(
            "initial",
            format!("expected a {frame}-frame state"),
        ));
    }
    if initial.l() != params.l() {
        return Err(Error::invalid("initial", "dimension does not match params"));
    }
    let mut per_pair = Vec::with_capacity(params.l());
    let (mut acc, mut rej) = (0, 0);
    for (p, &r) in initial.pairs.iter().zip(&params.r) {
        let (states, a, b) = integrate_pair(frame, r, *p, grid, tol)?;
        acc += a;
        rej += b;
        per_pair.push(states);
    }
    let states = (0..grid.len())
        .map(|i| GeodesicState {
            frame,
            pairs: per_pair.iter().map(|s| s[i]).collect(),
        })
        .collect();
    Ok(Trajectory {
        params: params.clone(),
        frame,
        tau: grid.to_vec(),
        states,
        tol: *tol,
        accepted_steps: acc,
        rejected_steps: rej,
    })
}

/// Initial state on the closed-form family at `tau0`, the default starting
/// point for numeric runs.
pub fn default_initial_state(
    params: &ModelParams,
    frame: CoordinateFrame,
    tau0: f64,
) -> Result<GeodesicState> {
    closed_form_state(tau0, params, frame)
}

/// Agreement between a numeric trajectory and the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormComparison {
    /// Max over components of `max_tau |y - y_ref| / max_tau |y_ref|`: errors
    /// measured against each component's scale over the whole span.
    pub span_scaled: f64,
    /// Max over samples of `|y - y_ref|_inf / |y_ref|_inf`. The state decays
    /// like `e^{-lambda tau}`, so this needs absolute tolerances well below the
    /// smallest state value to be small.
    pub pointwise: f64,
}

pub fn compare_with_closed_form(traj: &Trajectory) -> Result<ClosedFormComparison> {
    let mut pointwise: f64 = 0.0;
    let l = traj.params.l();
    let mut err_max = vec![[0.0f64; 4]; l];
    let mut ref_max = vec![[0.0f64; 4]; l];
    for (tau, state) in traj.tau.iter().zip(&traj.states) {
        for (k, p) in state.pairs.iter().enumerate() {
            let c = closed_form_pair(*tau, traj.params.pair(k), traj.frame)?
                .state
                .to_array();
            let y = p.to_array();
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for i in 0..4 {
                let d = (y[i] - c[i]).abs();
                diff = diff.max(d);
                scale = scale.max(c[i].abs());
                err_max[k][i] = err_max[k][i].max(d);
                ref_max[k][i] = ref_max[k][i].max(c[i].abs());
            }
            pointwise = pointwise.max(diff / scale);
        }
    }
    let mut span_scaled: f64 = 0.0;
    for (e, r) in err_max.iter().zip(&ref_max) {
        for i in 0..4 {
            if r[i] > 0.0 {
                span_scaled = span_scaled.max(e[i] / r[i]);
            }
        }
    }
    Ok(ClosedFormComparison {
        span_scaled,
        pointwise,
    })
}

/// The closed-form geodesic sampled on `grid`, packaged as a trajectory.
pub fn closed_form_trajectory(
    params: &ModelParams,
    frame: CoordinateFrame,
    grid: &[f64],
) -> Result<Trajectory> {
    params.validate()?;
    check_grid(grid)?;
    let states = grid
        .iter()
        .map(|&t| closed_form_state(t, params, frame))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        params: params.clone(),
        frame,
        tau: grid.to_vec(),
        states,
        tol: ToleranceSpec::default(),
        accepted_steps: 0,
        rejected_steps: 0,
    })
}

/// `min_{r in (0,1)} |a1(r) / a0(r)|`, attained as `r -> 1`:
/// `(1 + sqrt 5) / (sqrt 5 - 1)`.
pub fn hypothesis_bound() -> f64 {
    let s5 = 5f64.sqrt();
    (1.0 + s5) / (s5 - 1.0)
}

/// Same bound found by a grid plus golden-section search over `(0, 1)`.
pub fn hypothesis_bound_numeric() -> Result<f64> {
    let m = maximize_1d(
        |r| {
            let sd = (1.0 + 4.0 * r * r).sqrt();
            -((1.0 + sd) / (1.0 - sd)).abs()
        },
        (0.0, 1.0),
        1e-12,
    )?;
    Ok(-m.max)
}

/// Ratio `mu~_k / sigma~_k` along a trajectory and the fitted decay rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub tau: Vec<f64>,
    /// `ratio[k][i]` is pair `k` at `tau[i]`.
    pub ratio: Vec<Vec<f64>>,
    /// Semi-log fit of `|ratio|`; `-exponent` is the decay rate.
    pub fits: Vec<Option<FitResult>>,
    pub bound: f64,
    /// `|ratio|` at the last sample is below 1% of the bound for every pair.
    pub satisfied: bool,
}

impl HypothesisReport {
    pub fn decay_rate(&self, k: usize) -> Option<f64> {
        self.fits[k].map(|f| -f.exponent)
    }
}

/// Checks the working hypothesis `mu~/sigma~ -> 0` along `traj`. The fit
/// uses samples with `tau >= fit_from`.
pub fn hypothesis_ratio(traj: &Trajectory, fit_from: f64) -> Result<HypothesisReport> {
    let tilde = traj.convert(CoordinateFrame::Tilde)?;
    let bound = hypothesis_bound();
    let mut ratio = Vec::new();
    let mut fits = Vec::new();
    let mut satisfied = true;
    for k in 0..traj.params.l() {
        let mut series = Vec::with_capacity(tilde.len());
        for (tau, s) in tilde.tau.iter().zip(&tilde.states) {
            let p = s.pairs[k];
            guard_sigma(*tau, "sigma~", p.sigma)?;
            series.push(p.mu / p.sigma);
        }
        let pts: Vec<(f64, f64)> = tilde
            .tau
            .iter()
            .zip(&series)
            .filter(|(t, v)| **t >= fit_from && v.abs() > 0.0)
            .map(|(t, v)| (*t, v.abs()))
            .collect();
        fits.push(fit_exponential_rate(&pts, None).ok());
        if series.last().is_none_or(|v| !(v.abs() < 0.01 * bound)) {
            satisfied = false;
        }
        ratio.push(series);
    }
    Ok(HypothesisReport {
        tau: tilde.tau,
        ratio,
        fits,
        bound,
        satisfied,
    })
}

/// Evenly spaced grid with `n` points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use CoordinateFrame::*;

    fn p1(r: f64, lambda: f64, xi: f64) -> ModelParams {
        ModelParams::single(r, lambda, xi).unwrap()
    }

    #[test]
    fn zero_velocity_gives_zero_acceleration() {
        let p = PairState::new(0.3, 1.7, 0.0, 0.0);
        for f in [Original, Tilde, Primed] {
            assert_eq!(pair_acceleration(f, 0.5, &p, 0.0).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn original_frame_example() {
        let s = GeodesicState::new(Original, vec![PairState::new(0.0, 1.0, 1.0, 0.0)]).unwrap();
        let a = rhs_original(&s, &p1(0.5, 1.0, 1.0)).unwrap()[0];
        assert_relative_eq!(a.0, 0.5 / 1.75, epsilon = 1e-15);
        assert_relative_eq!(a.1, -1.0 / 1.75, epsilon = 1e-15);
    }

    #[test]
    fn uncorrelated_limits() {
        let p = PairState::new(0.0, 1.3, 0.7, -0.4);
        let a = pair_acceleration(Original, 0.0, &p, 0.0).unwrap();
        assert_relative_eq!(a.0, 2.0 * 0.7 * -0.4 / 1.3, epsilon = 1e-15);
        assert_relative_eq!(a.1, -0.49 / 2.6 + 0.16 / 1.3, epsilon = 1e-15);
        let t = pair_acceleration(Tilde, 1e-7, &p, 0.0).unwrap();
        assert!((t.1 - a.1).abs() < 1e-12);
    }

    #[test]
    fn guard_trips_at_small_sigma() {
        let p = PairState::new(0.0, 1e-13, 1.0, 1.0);
        for f in [Original, Tilde, Primed] {
            assert!(matches!(
                pair_acceleration(f, 0.5, &p, 2.0),
                Err(Error::Singularity { .. })
            ));
        }
    }

    #[test]
    fn closed_form_examples() {
        let c = closed_form_primed(0.0, 8.0, 1.0);
        assert_relative_eq!(c.state.mu, 32.0 / 9.0 - 4.0, epsilon = 1e-15);
        assert_relative_eq!(c.state.sigma, 8.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(c.state.mu_dot, 64.0 / 81.0, epsilon = 1e-15);
        assert_relative_eq!(c.state.sigma_dot, -56.0 / 81.0, epsilon = 1e-15);
        let far = closed_form_primed(60.0, 8.0, 1.0);
        assert!(far.state.mu.abs() < 1e-12 && far.state.sigma.abs() < 1e-12);
    }

    #[test]
    fn stable_mu_matches_printed_form() {
        for &(xi, lambda) in &[(8.0, 1.0), (1.0, 0.5), (1.0, 2.0)] {
            for tau in linspace(0.0, 5.0, 11) {
                let k = xi * xi / (8.0 * lambda * lambda);
                let printed =
                    (xi * xi / (2.0 * lambda)) / ((-2.0 * lambda * tau).exp() + k) - 4.0 * lambda;
                assert!((closed_form_primed(tau, xi, lambda).state.mu - printed).abs() < 1e-13);
            }
        }
        // far out the printed form has cancelled to zero, the stable one has not
        let c = closed_form_primed(20.0, 8.0, 1.0);
        assert!(c.state.mu < 0.0);
        assert_relative_eq!(c.state.mu, -0.5 * (-40.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        use crate::numerics::{finite_diff, DiffOrder};
        for &(xi, lambda) in &[(8.0, 1.0), (1.0, 0.5), (1.0, 2.0)] {
            for &tau in &[0.0, 0.7, 3.0] {
                let c = closed_form_primed(tau, xi, lambda);
                let h = 1e-5;
                let dm = finite_diff(
                    |t| closed_form_primed(t, xi, lambda).state.mu,
                    tau,
                    DiffOrder::First,
                    h,
                )
                .unwrap();
                let ds = finite_diff(
                    |t| closed_form_primed(t, xi, lambda).state.sigma,
                    tau,
                    DiffOrder::First,
                    h,
                )
                .unwrap();
                let ddm = finite_diff(
                    |t| closed_form_primed(t, xi, lambda).state.mu_dot,
                    tau,
                    DiffOrder::First,
                    h,
                )
                .unwrap();
                let dds = finite_diff(
                    |t| closed_form_primed(t, xi, lambda).state.sigma_dot,
                    tau,
                    DiffOrder::First,
                    h,
                )
                .unwrap();
                assert!((dm - c.state.mu_dot).abs() < 1e-8);
                assert!((ds - c.state.sigma_dot).abs() < 1e-8);
                assert!((ddm - c.mu_ddot).abs() < 1e-8);
                assert!((dds - c.sigma_ddot).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn closed_form_original_matches_composition() {
        let params = p1(0.5, 1.0, 1.0);
        for &tau in &[0.0, 1.0, 5.0, 12.0] {
            let direct = closed_form_original(tau, &params, 0).unwrap();
            let composed = closed_form_pair(tau, params.pair(0), Original)
                .unwrap()
                .state;
            assert!((direct.0 - composed.mu).abs() < 1e-12);
            assert!((direct.1 - composed.sigma).abs() < 1e-12);
        }
        assert!(closed_form_original(0.0, &params, 1).is_err());
    }

    #[test]
    fn residuals_vanish_in_primed_and_tilde_frames() {
        for &xi in &[1.0, 8.0] {
            for &lambda in &[0.5, 1.0, 2.0] {
                let pair = PairParams { r: 0.5, lambda, xi };
                for tau in linspace(0.0, 20.0, 201) {
                    assert!(closed_form_residual(tau, pair, Primed).unwrap() < 1e-9);
                    assert!(closed_form_residual(tau, pair, Tilde).unwrap() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rate_covariance() {
        // (lambda, xi) -> c (lambda, xi) maps the solution to c * solution(c tau)
        let c = 2.5;
        for tau in linspace(0.0, 4.0, 9) {
            let a = closed_form_primed(tau, c * 8.0, c * 1.0).state;
            let b = closed_form_primed(c * tau, 8.0, 1.0).state;
            assert!((a.sigma - c * b.sigma).abs() < 1e-12);
            assert!((a.mu - c * b.mu).abs() < 1e-12);
            // and the rescaled sample still solves the primed system
            let (x, y) = pair_acceleration(Primed, 0.5, &a, tau).unwrap();
            let cf = closed_form_primed(tau, c * 8.0, c * 1.0);
            assert!((x - cf.mu_ddot).abs() < 1e-9 && (y - cf.sigma_ddot).abs() < 1e-9);
        }
    }

    #[test]
    fn integration_reproduces_closed_form() {
        let params = p1(0.5, 1.0, 8.0);
        let init = default_initial_state(&params, Primed, 0.0).unwrap();
        let grid = linspace(0.0, 10.0, 101);
        let traj =
            integrate_geodesic(&params, Primed, &init, &grid, &ToleranceSpec::default()).unwrap();
        let e = compare_with_closed_form(&traj).unwrap();
        assert!(e.span_scaled < 1e-6, "{e:?}");
        let tight = ToleranceSpec::new(1e-14, 1e-10, 200_000).unwrap();
        let traj = integrate_geodesic(&params, Primed, &init, &grid, &tight).unwrap();
        let e = compare_with_closed_form(&traj).unwrap();
        assert!(e.pointwise < 1e-6, "{e:?}");
    }

    #[test]
    fn constant_trajectory_from_rest() {
        let params = p1(0.5, 1.0, 8.0);
        let init = GeodesicState::new(Primed, vec![PairState::new(0.2, 1.1, 0.0, 0.0)]).unwrap();
        let traj = integrate_geodesic(
            &params,
            Primed,
            &init,
            &linspace(0.0, 5.0, 11),
            &ToleranceSpec::default(),
        )
        .unwrap();
        for s in &traj.states {
            assert_eq!(s.pairs[0], init.pairs[0]);
        }
    }

    #[test]
    fn pairs_decouple() {
        let both = ModelParams::new(vec![0.3, 0.7], vec![0.5, 2.0], vec![1.0, 8.0]).unwrap();
        let grid = linspace(0.0, 6.0, 31);
        let tol = ToleranceSpec::default();
        let joint = integrate_geodesic(
            &both,
            Tilde,
            &default_initial_state(&both, Tilde, 0.0).unwrap(),
            &grid,
            &tol,
        )
        .unwrap();
        for k in 0..2 {
            let single = ModelParams::single(both.r[k], both.lambda[k], both.xi[k]).unwrap();
            let alone = integrate_geodesic(
                &single,
                Tilde,
                &default_initial_state(&single, Tilde, 0.0).unwrap(),
                &grid,
                &tol,
            )
            .unwrap();
            for (a, b) in joint.states.iter().zip(&alone.states) {
                assert_eq!(a.pairs[k], b.pairs[0]);
            }
        }
    }

    #[test]
    fn speed_is_conserved() {
        let params = p1(0.5, 1.0, 8.0);
        let grid = linspace(0.0, 10.0, 101);
        let traj = integrate_geodesic(
            &params,
            Tilde,
            &default_initial_state(&params, Tilde, 0.0).unwrap(),
            &grid,
            &ToleranceSpec::default(),
        )
        .unwrap();
        let v0 = pair_speed_squared(Tilde, 0.5, &traj.states[0].pairs[0]).unwrap();
        for s in &traj.states {
            let v = pair_speed_squared(Tilde, 0.5, &s.pairs[0]).unwrap();
            assert!(((v - v0) / v0).abs() < 1e-6);
        }
    }

    #[test]
    fn singularity_reports_last_good_tau() {
        // sigma' = 0.5 - tau collapses linearly; no geodesic, but a valid stress test
        let params = p1(0.5, 1.0, 8.0);
        let init =
            GeodesicState::new(Original, vec![PairState::new(0.0, 1e-3, 0.0, -1.0)]).unwrap();
        let err = integrate_geodesic(
            &params,
            Original,
            &init,
            &linspace(0.0, 1.0, 5),
            &ToleranceSpec::default(),
        )
        .unwrap_err();
        match err {
            Error::Singularity { tau, .. } => assert!(tau.is_finite() && (0.0..1.0).contains(&tau)),
            Error::StepSizeUnderflow { .. } => {}
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_grids_rejected() {
        let params = p1(0.5, 1.0, 8.0);
        let init = default_initial_state(&params, Primed, 0.0).unwrap();
        let tol = ToleranceSpec::default();
        assert!(integrate_geodesic(&params, Primed, &init, &[0.0], &tol).is_err());
        assert!(integrate_geodesic(&params, Primed, &init, &[0.0, 0.0], &tol).is_err());
        assert!(integrate_geodesic(&params, Tilde, &init, &[0.0, 1.0], &tol).is_err());
    }

    #[test]
    fn hypothesis_bound_values() {
        assert_relative_eq!(hypothesis_bound(), 2.618033988749895, epsilon = 1e-12);
        let numeric = hypothesis_bound_numeric().unwrap();
        assert!((numeric - hypothesis_bound()).abs() < 1e-6);
        assert!((2.6 - numeric).abs() < 0.05);
    }

    #[test]
    fn ratio_decays_at_lambda() {
        for &lambda in &[0.5, 1.0, 2.0] {
            let params = p1(0.5, lambda, 8.0);
            let grid = linspace(0.0, 20.0 / lambda, 201);
            let traj = closed_form_trajectory(&params, Primed, &grid).unwrap();
            let rep = hypothesis_ratio(&traj, 2.0 / lambda).unwrap();
            assert!(rep.ratio[0][0].is_finite());
            let rate = rep.decay_rate(0).unwrap();
            assert!(((rate - lambda) / lambda).abs() < 0.02, "rate {rate}");
            assert!(rep.satisfied);
        }
    }
}
