//! Parameter sweeps. Values run concurrently on a bounded pool; rows come
//! back in input order whatever order they finish in.

use rayon::prelude::*;
use serde_json::Value;

use crate::commands::run_command;
use crate::config::{invalid, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report::{Cell, Payload, Table};

/// Outcome for one sweep value.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub value: f64,
    pub result: Result<Payload, String>,
    pub validation: bool,
}

pub fn run_values(config: &RunConfig, jobs: Option<usize>) -> CliResult<Vec<SweepOutcome>> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| invalid("sweep needs a `sweep` section"))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    let outcomes = pool.install(|| {
        spec.values
            .par_iter()
            .map(|&v| {
                let c = config.with_value(spec.parameter, v, spec.command);
                match c
                    .validate(spec.command)
                    .and_then(|_| run_command(spec.command, &c))
                {
                    Ok(p) => SweepOutcome {
                        value: v,
                        result: Ok(p),
                        validation: false,
                    },
                    Err(e) => SweepOutcome {
                        value: v,
                        validation: matches!(e, CliError::Validation(_)),
                        result: Err(e.to_string()),
                    },
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(outcomes)
}

fn trend(values: &[(f64, f64)]) -> &'static str {
    if values.len() < 2 {
        return "constant";
    }
    let up = values.windows(2).all(|w| w[1].1 > w[0].1);
    let down = values.windows(2).all(|w| w[1].1 < w[0].1);
    match (up, down) {
        (true, _) => "increasing",
        (_, true) => "decreasing",
        _ => "non-monotone",
    }
}

/// Maximal runs of sweep values over which `y` strictly increases.
fn increasing_runs(values: &[(f64, f64)]) -> Vec<[f64; 2]> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for i in 1..values.len() {
        if values[i].1 > values[i - 1].1 {
            start.get_or_insert(i - 1);
        } else if let Some(s) = start.take() {
            runs.push([values[s].0, values[i - 1].0]);
        }
    }
    if let Some(s) = start {
        runs.push([values[s].0, values[values.len() - 1].0]);
    }
    runs
}

/// Runs the sweep and tabulates the numeric summary of each value. Failed
/// values keep their row with the error text. The error returned alongside
/// a payload reports whether any value failed.
pub fn sweep_payload(
    config: &RunConfig,
    jobs: Option<usize>,
) -> CliResult<(Payload, Option<CliError>)> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| invalid("sweep needs a `sweep` section"))?;
    let outcomes = run_values(config, jobs)?;

    // columns: numeric summary keys in order of first appearance
    let mut keys: Vec<String> = Vec::new();
    for o in &outcomes {
        if let Ok(p) = &o.result {
            for (k, v) in &p.summary {
                if (v.is_number() || v.is_null()) && !keys.contains(k) {
                    keys.push(k.clone());
                }
            }
        }
    }
    let mut columns = vec![
        "value".to_string(),
        "status".to_string(),
        "error".to_string(),
    ];
    columns.extend(keys.iter().cloned());
    let mut table = Table::new("sweep", columns);
    let mut failed = Vec::new();
    let mut any_validation = false;
    for o in &outcomes {
        let mut row: Vec<Cell> = vec![o.value.into()];
        match &o.result {
            Ok(p) => {
                row.push("ok".into());
                row.push(Cell::Null);
                for k in &keys {
                    row.push(match p.summary.get(k) {
                        Some(Value::Number(n)) if n.is_i64() => {
                            Cell::Int(n.as_i64().unwrap_or_default())
                        }
                        Some(Value::Number(n)) => n.as_f64().into(),
                        _ => Cell::Null,
                    });
                }
            }
            Err(e) => {
                row.push("error".into());
                row.push(e.clone().into());
                row.extend(keys.iter().map(|_| Cell::Null));
                failed.push(o.value);
                any_validation |= o.validation;
            }
        }
        table.push(row);
    }

    let mut p = Payload::default();
    p.set("command", spec.command);
    p.set("parameter", spec.parameter);
    p.set("values", spec.values.len());
    p.set("failed", failed.len());
    let mut trends = serde_json::Map::new();
    let mut runs = serde_json::Map::new();
    for k in &keys {
        let series: Vec<(f64, f64)> = table
            .rows
            .iter()
            .filter_map(|r| {
                let i = table.columns.iter().position(|c| c == k)?;
                Some((r[0].as_f64()?, r[i].as_f64()?))
            })
            .collect();
        trends.insert(k.clone(), Value::from(trend(&series)));
        runs.insert(
            k.clone(),
            serde_json::to_value(increasing_runs(&series)).unwrap_or(Value::Null),
        );
    }
    p.set("trends", trends);
    p.set("increasing_runs", runs);
    for o in &outcomes {
        if let Ok(q) = &o.result {
            p.warnings
                .extend(q.warnings.iter().map(|w| format!("value {}: {w}", o.value)));
        }
    }
    p.tables = vec![table];
    let err = (!failed.is_empty()).then(|| {
        let msg = format!(
            "{} of {} sweep values failed: {failed:?}",
            failed.len(),
            spec.values.len()
        );
        if any_validation {
            CliError::Validation(msg)
        } else {
            CliError::Numerical(msg)
        }
    });
    Ok((p, err))
}

/// Sweep as a plain payload command; per-value failures stay in the table.
pub fn cmd_sweep(config: &RunConfig, jobs: Option<usize>) -> CliResult<Payload> {
    sweep_payload(config, jobs).map(|(p, _)| p)
}
