//! Dormand–Prince 5(4) integrator with embedded error estimate.

use crate::{Error, Result};

use super::ToleranceSpec;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Output of [`ode_solve`]: sample times, states and work counters.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
}

impl OdeSolution {
    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.t
            .last()
            .map(|&t| (t, self.y.last().unwrap().as_slice()))
    }
}

/// Integrates `y' = rhs(t, y)` over `span` (forward or backward).
///
/// With `t_eval = None` every accepted step is recorded, starting with the
/// initial point. Otherwise the integrator lands exactly on each requested
/// time, which must lie inside `span` and be monotone in the direction of
/// integration.
///
/// The right-hand side is fallible so singularity guards inside it abort the
/// integration with their own error. A [`Error::Singularity`] raised during a
/// trial step is re-stamped with the last accepted time.
pub fn ode_solve<F>(
    mut rhs: F,
    y0: &[f64],
    span: (f64, f64),
    tol: &ToleranceSpec,
    t_eval: Option<&[f64]>,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    tol.validate()?;
    let (t0, t1) = span;
    if !(t0.is_finite() && t1.is_finite()) || t0 == t1 {
        return Err(Error::invalid("span", "must be finite and non-degenerate"));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "initial state",
            x: t0,
        });
    }
    let dir = (t1 - t0).signum();
    let targets: Vec<f64> = match t_eval {
        Some(ts) => {
            let ts = ts.to_vec();
            for w in ts.windows(2) {
                if (w[1] - w[0]) * dir < 0.0 {
                    return Err(Error::invalid("t_eval", "must be monotone along the span"));
                }
            }
            if ts
                .iter()
                .any(|&t| (t - t0) * dir < 0.0 || (t - t1) * dir > 0.0)
            {
                return Err(Error::invalid("t_eval", "points must lie inside the span"));
            }
            ts
        }
        None => Vec::new(),
    };
    let record_all = t_eval.is_none();

    let n = y0.len();
    let mut sol = OdeSolution {
        t: Vec::new(),
        y: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
        rhs_evals: 0,
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    rhs(t, &y, &mut k1)?;
    sol.rhs_evals += 1;
    check_finite(&k1, t)?;

    let mut next_target = 0usize;
    if record_all {
        sol.t.push(t);
        sol.y.push(y.clone());
    } else {
        while next_target < targets.len() && targets[next_target] == t0 {
            sol.t.push(t0);
            sol.y.push(y.clone());
            next_target += 1;
        }
    }

    let mut h = initial_step(&mut rhs, t, &y, &k1, dir, (t1 - t0).abs(), tol)?;
    sol.rhs_evals += 1;

    let mut stages = Stages::new(n);
    let mut y_new = vec![0.0; n];
    let mut err_vec = vec![0.0; n];
    let mut last_fail = false;

    while (t1 - t) * dir > 0.0 {
        if sol.accepted_steps + sol.rejected_steps >= tol.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: tol.max_steps,
                t,
            });
        }
        // distance to the next hard stop (span end or requested output)
        let stop = if next_target < targets.len() {
            targets[next_target]
        } else {
            t1
        };
        let mut h_try = h;
        let mut hits_stop = false;
        if (t + h_try - stop) * dir >= 0.0 {
            h_try = stop - t;
            hits_stop = true;
        }
        if h_try.abs() <= 10.0 * f64::EPSILON * t.abs().max(1.0) {
            if hits_stop {
                // already sitting on the stop point
                t = stop;
                record(&mut sol, &mut next_target, &targets, record_all, t, &y);
                continue;
            }
            return Err(Error::StepSizeUnderflow { t, h: h_try });
        }

        if let Err(e) = stages.step(&mut rhs, t, &y, &k1, h_try, &mut y_new, &mut err_vec) {
            return Err(match e {
                Error::Singularity { what, value, .. } => Error::Singularity {
                    tau: t,
                    what,
                    value,
                },
                e => e,
            });
        }
        sol.rhs_evals += 6;

        let err = error_norm(&err_vec, &y, &y_new, tol);
        if !err.is_finite() {
            sol.rejected_steps += 1;
            h = h_try * FAC_MIN;
            last_fail = true;
            continue;
        }
        if err <= 1.0 {
            t = if hits_stop { stop } else { t + h_try };
            y.copy_from_slice(&y_new);
            k1.copy_from_slice(&stages.k7);
            sol.accepted_steps += 1;
            check_finite(&y, t)?;
            if record_all || hits_stop {
                record(&mut sol, &mut next_target, &targets, record_all, t, &y);
            }
            let mut fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if last_fail {
                fac = fac.min(1.0);
            }
            // a step shortened to hit an output point says nothing new about h
            if !hits_stop || h_try.abs() >= h.abs() {
                h = h_try * fac;
            }
            last_fail = false;
        } else {
            sol.rejected_steps += 1;
            let fac = (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
            h = h_try * fac;
            last_fail = true;
        }
    }
    Ok(sol)
}

fn record(
    sol: &mut OdeSolution,
    next_target: &mut usize,
    targets: &[f64],
    record_all: bool,
    t: f64,
    y: &[f64],
) {
    if record_all {
        sol.t.push(t);
        sol.y.push(y.to_vec());
        return;
    }
    while *next_target < targets.len() && targets[*next_target] == t {
        sol.t.push(t);
        sol.y.push(y.to_vec());
        *next_target += 1;
    }
}

fn check_finite(v: &[f64], t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: "ode state",
            x: t,
        })
    }
}

fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], tol: &ToleranceSpec) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = tol.abs_tol + tol.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

// Hairer, Nørsett & Wanner starting step heuristic.
fn initial_step<F>(
    rhs: &mut F,
    t: f64,
    y: &[f64],
    f0: &[f64],
    dir: f64,
    span_len: f64,
    tol: &ToleranceSpec,
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len().max(1) as f64;
    let sc: Vec<f64> = y
        .iter()
        .map(|v| tol.abs_tol + tol.rel_tol * v.abs())
        .collect();
    let norm = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span_len);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, f)| a + dir * h0 * f).collect();
    let mut f1 = vec![0.0; y.len()];
    rhs(t + dir * h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok(dir * (100.0 * h0).min(h1).min(span_len))
}

struct Stages {
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    k5: Vec<f64>,
    k6: Vec<f64>,
    k7: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            k5: vec![0.0; n],
            k6: vec![0.0; n],
            k7: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn step<F>(
        &mut self,
        rhs: &mut F,
        t: f64,
        y: &[f64],
        k1: &[f64],
        h: f64,
        y_new: &mut [f64],
        err: &mut [f64],
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        for i in 0..n {
            self.tmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * (A31 * k1[i] + A32 * self.k2[i]);
        }
        rhs(t + C3 * h, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * (A41 * k1[i] + A42 * self.k2[i] + A43 * self.k3[i]);
        }
        rhs(t + C4 * h, &self.tmp, &mut self.k4)?;
        for i in 0..n {
            self.tmp[i] =
                y[i] + h * (A51 * k1[i] + A52 * self.k2[i] + A53 * self.k3[i] + A54 * self.k4[i]);
        }
        rhs(t + C5 * h, &self.tmp, &mut self.k5)?;
        for i in 0..n {
            self.tmp[i] = y[i]
                + h * (A61 * k1[i]
                    + A62 * self.k2[i]
                    + A63 * self.k3[i]
                    + A64 * self.k4[i]
                    + A65 * self.k5[i]);
        }
        rhs(t + h, &self.tmp, &mut self.k6)?;
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i]
                    + A73 * self.k3[i]
                    + A74 * self.k4[i]
                    + A75 * self.k5[i]
                    + A76 * self.k6[i]);
        }
        rhs(t + h, y_new, &mut self.k7)?;
        for i in 0..n {
            err[i] = h
                * (E1 * k1[i]
                    + E3 * self.k3[i]
                    + E4 * self.k4[i]
                    + E5 * self.k5[i]
                    + E6 * self.k6[i]
                    + E7 * self.k7[i]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy[0] = -y[0];
        Ok(())
    }

    #[test]
    fn exponential_decay() {
        let tol = ToleranceSpec::default();
        let sol = ode_solve(decay, &[1.0], (0.0, 1.0), &tol, None).unwrap();
        let (t, y) = sol.last().unwrap();
        assert_eq!(t, 1.0);
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn constant_solution() {
        let tol = ToleranceSpec::default();
        let sol = ode_solve(
            |_, _, dy: &mut [f64]| {
                dy[0] = 0.0;
                Ok(())
            },
            &[3.0],
            (0.0, 5.0),
            &tol,
            None,
        )
        .unwrap();
        assert!(sol.y.iter().all(|y| y[0] == 3.0));
    }

    #[test]
    fn lands_on_requested_points() {
        let tol = ToleranceSpec::default();
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let sol = ode_solve(decay, &[1.0], (0.0, 3.0), &tol, Some(&ts)).unwrap();
        assert_eq!(sol.t, ts);
        for (t, y) in sol.t.iter().zip(&sol.y) {
            assert!((y[0] - (-t).exp()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn backward_integration() {
        let tol = ToleranceSpec::default();
        let sol = ode_solve(decay, &[(-2.0f64).exp()], (2.0, 0.0), &tol, None).unwrap();
        let (t, y) = sol.last().unwrap();
        assert_eq!(t, 0.0);
        assert!((y[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn harmonic_oscillator() {
        let tol = ToleranceSpec::new(1e-12, 1e-10, 100_000).unwrap();
        let sol = ode_solve(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            &[0.0, 1.0],
            (0.0, 10.0),
            &tol,
            None,
        )
        .unwrap();
        let (_, y) = sol.last().unwrap();
        assert!((y[0] - 10f64.sin()).abs() < 1e-8);
        assert!((y[1] - 10f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn blow_up_reports_failure() {
        // y' = y^2 with y(0)=1 blows up at t=1
        let tol = ToleranceSpec::new(1e-10, 1e-8, 5_000).unwrap();
        let res = ode_solve(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            &[1.0],
            (0.0, 2.0),
            &tol,
            None,
        );
        assert!(matches!(
            res,
            Err(Error::StepSizeUnderflow { .. })
                | Err(Error::MaxStepsExceeded { .. })
                | Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn max_steps_enforced() {
        let tol = ToleranceSpec::new(1e-14, 1e-14, 3).unwrap();
        let res = ode_solve(decay, &[1.0], (0.0, 100.0), &tol, None);
        assert!(matches!(res, Err(Error::MaxStepsExceeded { .. })));
    }

    #[test]
    fn rhs_errors_propagate() {
        let tol = ToleranceSpec::default();
        let res = ode_solve(
            |t, y: &[f64], dy: &mut [f64]| {
                if y[0] <= 0.5 {
                    return Err(Error::Singularity {
                        tau: t,
                        what: "y",
                        value: y[0],
                    });
                }
                dy[0] = -1.0;
                Ok(())
            },
            &[1.0],
            (0.0, 2.0),
            &tol,
            None,
        );
        assert!(matches!(res, Err(Error::Singularity { .. })));
    }

    #[test]
    fn degenerate_span_rejected() {
        let tol = ToleranceSpec::default();
        assert!(ode_solve(decay, &[1.0], (1.0, 1.0), &tol, None).is_err());
    }

    #[test]
    fn tighter_tolerance_never_worse() {
        let mut prev = f64::INFINITY;
        for k in 0..5 {
            let f = 0.5f64.powi(k);
            let tol = ToleranceSpec::new(1e-8 * f, 1e-8 * f, 100_000).unwrap();
            let sol = ode_solve(decay, &[1.0], (0.0, 3.0), &tol, None).unwrap();
            let err = (sol.last().unwrap().1[0] - (-3.0f64).exp()).abs();
            assert!(
                err <= prev * 1.0000001 + 1e-16,
                "k={k} err={err} prev={prev}"
            );
            prev = err;
        }
    }

    #[test]
    fn deterministic() {
        let tol = ToleranceSpec::default();
        let a = ode_solve(decay, &[1.0], (0.0, 3.0), &tol, None).unwrap();
        let b = ode_solve(decay, &[1.0], (0.0, 3.0), &tol, None).unwrap();
        assert_eq!(a, b);
    }
}
