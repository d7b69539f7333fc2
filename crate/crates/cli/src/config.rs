//! Run configuration: a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use igeoflow_core::complexity::logspace;
use igeoflow_core::geodesics::linspace;
use igeoflow_core::{ModelParams, ToleranceSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Curvature,
    Geodesic,
    Complexity,
    Jacobi,
    Embed,
    Sweep,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Geodesic => "geodesic",
            Command::Complexity => "complexity",
            Command::Jacobi => "jacobi",
            Command::Embed => "embed",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// A `tau` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.count < 2 {
            return Err(invalid(format!(
                "grid count must be >= 2 (got {})",
                self.count
            )));
        }
        if !(self.start.is_finite()
            && self.stop.is_finite()
            && self.start >= 0.0
            && self.stop > self.start)
        {
            return Err(invalid(format!(
                "grid needs 0 <= start < stop (got start = {}, stop = {})",
                self.start, self.stop
            )));
        }
        if self.spacing == Spacing::Log && self.start <= 0.0 {
            return Err(invalid("log-spaced grid needs start > 0"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Linear => linspace(self.start, self.stop, self.count),
            Spacing::Log => logspace(self.start, self.stop, self.count),
        }
    }
}

/// Tabulated constraint `mu_2 = f(mu_1, sigma_1)` on a rectangular grid;
/// `values[i][j]` is the value at `(mu[i], sigma[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedConstraint {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// `mu_2 = a1 mu_1 + a2 sigma_1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tabulated: Option<TabulatedConstraint>,
    /// Where the pullback oracle is evaluated for a linear constraint.
    #[serde(default = "default_point")]
    pub point: [f64; 2],
    #[serde(default = "default_h")]
    pub h: f64,
    /// Largest accepted jump between one-sided slopes of tabulated samples,
    /// relative to `1 + |slope|`.
    #[serde(default = "default_kink_tol")]
    pub kink_tol: f64,
}

fn default_point() -> [f64; 2] {
    [0.4, 1.3]
}

fn default_h() -> f64 {
    1e-4
}

fn default_kink_tol() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Applied to every pair.
    R,
    Lambda,
    Xi,
    TauMax,
    /// Linear embedding coefficients.
    A1,
    A2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub command: Command,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_params")]
    pub params: ModelParams,
    /// Filled with the command's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    /// `sigma~` values at which curvature is sampled.
    #[serde(default = "default_sigma_tilde")]
    pub sigma_tilde: Vec<f64>,
    /// Jacobi initial state per pair, `[J1, J2, J1', J2']` in the tilde frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<[f64; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_params() -> ModelParams {
    ModelParams {
        r: vec![0.5],
        lambda: vec![1.0],
        xi: vec![8.0],
    }
}

fn default_sigma_tilde() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, 4.0]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: default_params(),
            grid: None,
            tolerances: ToleranceSpec::default(),
            sigma_tilde: default_sigma_tilde(),
            initial: None,
            embedding: None,
            sweep: None,
            output: OutputSpec::default(),
        }
    }
}

/// Flags that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tau_max: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

pub(crate) fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides, command: Command) {
        if let Some(t) = o.tau_max {
            let command = match (&self.sweep, command) {
                (Some(s), Command::Sweep) => s.command,
                _ => command,
            };
            let mut g = self.grid.unwrap_or_else(|| self.default_grid(command));
            g.stop = t;
            self.grid = Some(g);
        }
        if let Some(t) = o.tol {
            self.tolerances.abs_tol = t;
            self.tolerances.rel_tol = t;
        }
        if let Some(p) = &o.out {
            self.output.path = Some(p.clone());
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
    }

    /// Grid used when the file gives none.
    pub fn default_grid(&self, command: Command) -> GridSpec {
        let slowest = self
            .params
            .lambda
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        match command {
            Command::Complexity => GridSpec {
                start: 1.0,
                stop: 1e5,
                count: 101,
                spacing: Spacing::Log,
            },
            Command::Jacobi if slowest.is_finite() && slowest > 0.0 => {
                let stop = 25.0 / slowest;
                GridSpec {
                    start: 0.0,
                    stop,
                    count: 20 * stop.ceil() as usize + 1,
                    spacing: Spacing::Linear,
                }
            }
            _ => GridSpec {
                start: 0.0,
                stop: 10.0,
                count: 101,
                spacing: Spacing::Linear,
            },
        }
    }

    /// Fills in the default grid so the echoed config is explicit. Sweeps keep
    /// it open so each value gets its own default.
    pub fn resolve(&mut self, command: Command) {
        if self.grid.is_none()
            && matches!(
                command,
                Command::Geodesic | Command::Complexity | Command::Jacobi
            )
        {
            self.grid = Some(self.default_grid(command));
        }
    }

    pub fn grid(&self, command: Command) -> Vec<f64> {
        self.grid
            .unwrap_or_else(|| self.default_grid(command))
            .points()
    }

    pub fn validate(&self, command: Command) -> CliResult<()> {
        self.params.validate()?;
        self.tolerances.validate()?;
        if let Some(g) = &self.grid {
            g.validate()?;
            if command == Command::Complexity && g.start <= 0.0 {
                return Err(invalid("complexity grid needs start > 0"));
            }
        }
        match command {
            Command::Curvature => {
                if self.sigma_tilde.is_empty() {
                    return Err(invalid("sigma_tilde must not be empty"));
                }
                if let Some(s) = self
                    .sigma_tilde
                    .iter()
                    .find(|s| !(**s > 0.0 && s.is_finite()))
                {
                    return Err(invalid(format!("sigma_tilde = {s} must be > 0")));
                }
            }
            Command::Jacobi => {
                if let Some(init) = &self.initial {
                    if init.len() != self.params.l() {
                        return Err(invalid(format!(
                            "initial needs one [J1, J2, J1', J2'] per pair (got {} for l = {})",
                            init.len(),
                            self.params.l()
                        )));
                    }
                }
            }
            Command::Embed => self.validate_embedding()?,
            Command::Sweep => self.validate_sweep()?,
            Command::Geodesic | Command::Complexity | Command::Verify => {}
        }
        Ok(())
    }

    fn validate_embedding(&self) -> CliResult<()> {
        let e = self.embedding.as_ref().ok_or_else(|| {
            invalid("embed needs an `embedding` section with `linear` or `tabulated`")
        })?;
        match (&e.linear, &e.tabulated) {
            (None, None) => return Err(invalid("embedding needs `linear` or `tabulated`")),
            (Some(_), Some(_)) => {
                return Err(invalid("embedding takes `linear` or `tabulated`, not both"))
            }
            (Some(a), None) => {
                if !(a[0].is_finite() && a[1].is_finite()) {
                    return Err(invalid("linear coefficients must be finite"));
                }
            }
            (None, Some(t)) => {
                let increasing = |v: &[f64]| v.len() >= 3 && v.windows(2).all(|w| w[1] > w[0]);
                if !increasing(&t.mu) || !increasing(&t.sigma) {
                    return Err(invalid(
                        "tabulated mu and sigma need >= 3 strictly increasing values",
                    ));
                }
                if t.values.len() != t.mu.len()
                    || t.values.iter().any(|row| row.len() != t.sigma.len())
                {
                    return Err(invalid(
                        "tabulated values must be a mu.len() x sigma.len() array",
                    ));
                }
                if t.values.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(invalid("tabulated values must be finite"));
                }
            }
        }
        if !(e.h > 0.0 && e.h.is_finite()) {
            return Err(invalid("embedding h must be > 0"));
        }
        if e.kink_tol.is_nan() || e.kink_tol <= 0.0 {
            return Err(invalid("embedding kink_tol must be > 0"));
        }
        Ok(())
    }

    fn validate_sweep(&self) -> CliResult<()> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| invalid("sweep needs a `sweep` section"))?;
        if matches!(s.command, Command::Sweep | Command::Verify) {
            return Err(invalid(format!(
                "cannot sweep the {} command",
                s.command.name()
            )));
        }
        if s.values.is_empty() {
            return Err(invalid("sweep values must not be empty"));
        }
        for &v in &s.values {
            let ok = match s.parameter {
                SweepParameter::R => v > 0.0 && v < 1.0,
                SweepParameter::Lambda | SweepParameter::Xi => v > 0.0 && v.is_finite(),
                SweepParameter::TauMax => {
                    let start = self.grid.map_or(0.0, |g| g.start);
                    v.is_finite() && v > start
                }
                SweepParameter::A1 | SweepParameter::A2 => v.is_finite(),
            };
            if !ok {
                let msg = match s.parameter {
                    SweepParameter::R => format!("r out of (0,1): sweep value {v}"),
                    p => format!("sweep value {v} outside the domain of {p:?}"),
                };
                return Err(invalid(msg));
            }
        }
        if matches!(s.parameter, SweepParameter::A1 | SweepParameter::A2)
            && (s.command != Command::Embed
                || self.embedding.as_ref().and_then(|e| e.linear).is_none())
        {
            return Err(invalid(
                "a1/a2 sweeps need the embed command with a linear constraint",
            ));
        }
        let mut inner = self.clone();
        inner.sweep = None;
        inner.validate(s.command)
    }

    /// Copy of the config with one sweep value applied.
    pub fn with_value(&self, parameter: SweepParameter, v: f64, command: Command) -> RunConfig {
        let mut c = self.clone();
        c.sweep = None;
        let l = c.params.l();
        match parameter {
            SweepParameter::R => c.params.r = vec![v; l],
            SweepParameter::Lambda => c.params.lambda = vec![v; l],
            SweepParameter::Xi => c.params.xi = vec![v; l],
            SweepParameter::TauMax => {
                let mut g = c.grid.unwrap_or_else(|| c.default_grid(command));
                g.stop = v;
                c.grid = Some(g);
            }
            SweepParameter::A1 | SweepParameter::A2 => {
                if let Some(lin) = c.embedding.as_mut().and_then(|e| e.linear.as_mut()) {
                    lin[if parameter == SweepParameter::A1 {
                        0
                    } else {
                        1
                    }] = v;
                }
            }
        }
        c
    }
}
