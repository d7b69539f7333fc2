//! The documented report layout, and validators for emitted JSON and CSV.
//!
//! Column lists here are written out independently of the code that fills
//! the tables, so a drift between the two shows up as a validation error.

use serde_json::Value;

use crate::config::{Command, RunConfig};
use crate::report::SCHEMA_VERSION;

/// Columns holding text rather than numbers.
const TEXT_COLUMNS: [&str; 5] = ["factor", "form", "status", "error", "name"];
const MIXED_COLUMNS: [&str; 2] = ["detail", "passed"];

fn s(names: &[&str]) -> Vec<String> {
    names.iter().map(|n| n.to_string()).collect()
}

fn per_pair(names: &[&str], l: usize) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| (1..=l).map(move |k| format!("{n}_{k}")))
        .collect()
}

/// Table names of each command, primary first.
pub fn table_names(command: Command) -> &'static [&'static str] {
    match command {
        Command::Curvature => &["christoffel", "pairs"],
        Command::Geodesic => &["trajectory"],
        Command::Complexity => &["curve", "constants"],
        Command::Jacobi => &["solution", "constants", "attenuation", "maxima"],
        Command::Embed => &["embedding"],
        Command::Sweep => &["sweep"],
        Command::Verify => &["criteria"],
    }
}

/// Expected header of a table. `None` means the columns after a fixed
/// prefix depend on the data (sweep summaries).
pub fn expected_columns(command: Command, table: &str, l: usize) -> Option<Vec<String>> {
    let cols = match (command, table) {
        (Command::Curvature, "christoffel") => s(&[
            "pair",
            "r",
            "sigma_tilde",
            "gamma1_12",
            "gamma2_11",
            "gamma2_22",
            "riemann_1212",
            "riemann_1212_printed",
        ]),
        (Command::Curvature, "pairs") => s(&[
            "pair",
            "r",
            "scalar_contribution",
            "alpha_minus",
            "alpha_plus",
            "a0",
            "a1",
        ]),
        (Command::Geodesic, "trajectory") => {
            let mut c = s(&["tau"]);
            for k in 1..=l {
                c.push(format!("mu_p_{k}"));
                c.push(format!("sigma_p_{k}"));
            }
            for k in 1..=l {
                c.push(format!("mu_{k}"));
                c.push(format!("sigma_{k}"));
            }
            c.extend(per_pair(&["residual", "ratio"], l));
            c
        }
        (Command::Complexity, "curve") => s(&[
            "tau",
            "v_closed",
            "v_numeric",
            "v_factorized",
            "s_closed",
            "s_numeric",
            "s_factorized",
            "saturation",
        ]),
        (Command::Complexity, "constants") => s(&[
            "pair", "r", "lambda", "xi", "sigma", "lambda1", "lambda2", "bracket", "offset",
        ]),
        (Command::Jacobi, "solution") => {
            let mut c = s(&["tau"]);
            c.extend(per_pair(
                &["j1", "j2", "j1_dot", "j2_dot", "j1_asym", "j2_asym"],
                l,
            ));
            c.extend(s(&[
                "intensity_tilde",
                "intensity_tilde_asymptotic",
                "intensity_original",
                "intensity_original_asymptotic",
            ]));
            c
        }
        (Command::Jacobi, "constants") => s(&[
            "pair",
            "form",
            "c0",
            "c1",
            "c2",
            "c3",
            "deviation_j1",
            "deviation_j2",
        ]),
        (Command::Jacobi, "attenuation") => s(&[
            "r",
            "tilde",
            "tilde_printed",
            "embedded",
            "embedded_quadratic",
            "embedded_direct",
            "ratio",
            "ratio_quadratic",
        ]),
        (Command::Jacobi, "maxima") => s(&["factor", "argmax", "max"]),
        (Command::Embed, "embedding") => s(&[
            "mu",
            "sigma",
            "d_mu",
            "d_sigma",
            "a_mumu",
            "a_musigma",
            "a_sigmasigma",
            "r_analytic",
            "r_oracle",
            "delta",
        ]),
        (Command::Verify, "criteria") => s(&["id", "name", "passed", "detail"]),
        _ => return None,
    };
    Some(cols)
}

fn prefix(command: Command, table: &str) -> Vec<String> {
    match (command, table) {
        (Command::Sweep, "sweep") => s(&["value", "status", "error"]),
        _ => Vec::new(),
    }
}

fn check_header(command: Command, table: &str, l: usize, header: &[String]) -> Result<(), String> {
    match expected_columns(command, table, l) {
        Some(cols) if cols != header => Err(format!(
            "table `{table}`: header {header:?} does not match the documented columns {cols:?}"
        )),
        Some(_) => Ok(()),
        None => {
            let p = prefix(command, table);
            if header.len() < p.len() || header[..p.len()] != p[..] {
                return Err(format!("table `{table}`: header must start with {p:?}"));
            }
            Ok(())
        }
    }
}

fn cell_ok(column: &str, cell: &str) -> bool {
    if TEXT_COLUMNS.contains(&column) || MIXED_COLUMNS.contains(&column) {
        return true;
    }
    cell.is_empty() || cell.parse::<f64>().is_ok() || cell == "true" || cell == "false"
}

/// Checks a CSV document: header row present and matching the documented
/// columns, equal row widths, numeric cells parse.
pub fn validate_csv(command: Command, table: &str, l: usize, text: &str) -> Result<(), String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| format!("table `{table}`: {e}"))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(format!("table `{table}`: missing header row"));
    }
    check_header(command, table, l, &header)?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("table `{table}` row {}: {e}", i + 1))?;
        if rec.len() != header.len() {
            return Err(format!(
                "table `{table}` row {}: {} cells for {} columns",
                i + 1,
                rec.len(),
                header.len()
            ));
        }
        for (col, cell) in header.iter().zip(rec.iter()) {
            if !cell_ok(col, cell) {
                return Err(format!(
                    "table `{table}` row {} column `{col}`: `{cell}` is not a number",
                    i + 1
                ));
            }
        }
    }
    Ok(())
}

fn obj<'a>(v: &'a Value, path: &str) -> Result<&'a serde_json::Map<String, Value>, String> {
    v.as_object()
        .ok_or_else(|| format!("{path} must be an object"))
}

fn field<'a>(
    m: &'a serde_json::Map<String, Value>,
    key: &str,
    path: &str,
) -> Result<&'a Value, String> {
    m.get(key).ok_or_else(|| format!("{path}.{key} is missing"))
}

/// Checks a JSON report against the envelope schema.
pub fn validate_json(text: &str) -> Result<(), String> {
    let root: Value = serde_json::from_str(text).map_err(|e| format!("not JSON: {e}"))?;
    let m = obj(&root, "report")?;
    let allowed = [
        "schema_version",
        "command",
        "config",
        "payload",
        "provenance",
    ];
    if let Some(k) = m.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(format!("unexpected top-level field `{k}`"));
    }
    if field(m, "schema_version", "report")?.as_str() != Some(SCHEMA_VERSION) {
        return Err(format!("schema_version must be \"{SCHEMA_VERSION}\""));
    }
    let command: Command = serde_json::from_value(field(m, "command", "report")?.clone())
        .map_err(|e| format!("report.command: {e}"))?;
    let config: RunConfig = serde_json::from_value(field(m, "config", "report")?.clone())
        .map_err(|e| format!("report.config does not round-trip: {e}"))?;
    let l = config.params.r.len();

    let prov = obj(field(m, "provenance", "report")?, "provenance")?;
    if !field(prov, "version", "provenance")?.is_string() {
        return Err("provenance.version must be a string".into());
    }
    let tol = obj(
        field(prov, "tolerances", "provenance")?,
        "provenance.tolerances",
    )?;
    for k in ["abs_tol", "rel_tol"] {
        if !field(tol, k, "provenance.tolerances")?.is_number() {
            return Err(format!("provenance.tolerances.{k} must be a number"));
        }
    }
    if !field(tol, "max_steps", "provenance.tolerances")?.is_u64() {
        return Err("provenance.tolerances.max_steps must be a non-negative integer".into());
    }
    if let Some(w) = prov.get("wall_time_s") {
        if !w.is_number() {
            return Err("provenance.wall_time_s must be a number".into());
        }
    }

    let payload = obj(field(m, "payload", "report")?, "payload")?;
    obj(field(payload, "summary", "payload")?, "payload.summary")?;
    let warnings = field(payload, "warnings", "payload")?
        .as_array()
        .ok_or("payload.warnings must be an array")?;
    if warnings.iter().any(|w| !w.is_string()) {
        return Err("payload.warnings must hold strings".into());
    }
    let tables = field(payload, "tables", "payload")?
        .as_array()
        .ok_or("payload.tables must be an array")?;
    let names: Vec<&str> = tables
        .iter()
        .filter_map(|t| t.get("name").and_then(Value::as_str))
        .collect();
    if names != table_names(command) {
        return Err(format!(
            "{} report must carry tables {:?}, found {names:?}",
            command.name(),
            table_names(command)
        ));
    }
    for t in tables {
        let tm = obj(t, "table")?;
        let name = field(tm, "name", "table")?.as_str().unwrap_or_default();
        let header: Vec<String> = field(tm, "columns", name)?
            .as_array()
            .ok_or_else(|| format!("{name}.columns must be an array"))?
            .iter()
            .map(|c| {
                c.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| format!("{name}.columns must hold strings"))
            })
            .collect::<Result<_, _>>()?;
        check_header(command, name, l, &header)?;
        let rows = field(tm, "rows", name)?
            .as_array()
            .ok_or_else(|| format!("{name}.rows must be an array"))?;
        for (i, row) in rows.iter().enumerate() {
            let cells = row
                .as_array()
                .ok_or_else(|| format!("{name} row {i} must be an array"))?;
            if cells.len() != header.len() {
                return Err(format!(
                    "{name} row {i}: {} cells for {} columns",
                    cells.len(),
                    header.len()
                ));
            }
            for (col, c) in header.iter().zip(cells) {
                let ok = match c {
                    Value::Number(_) | Value::Null | Value::Bool(_) => true,
                    Value::String(_) => {
                        TEXT_COLUMNS.contains(&col.as_str())
                            || MIXED_COLUMNS.contains(&col.as_str())
                    }
                    _ => false,
                };
                if !ok {
                    return Err(format!(
                        "{name} row {i} column `{col}`: unexpected value {c}"
                    ));
                }
            }
        }
    }
    Ok(())
}
