//! Report envelope and its CSV/JSON renderings.
//!
//! Floats are written in the shortest form that parses back to the same
//! value, so identical runs give identical bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use igeoflow_core::ToleranceSpec;
use serde::{Serialize, Serializer};
use serde_json::{Map, Value};

use crate::config::{Command, Format, RunConfig};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        ryu::Buffer::new().format_finite(v).to_string()
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

impl Cell {
    pub fn to_csv(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            // JSON has no NaN or infinity
            Cell::Num(v) if v.is_finite() => s.serialize_f64(*v),
            Cell::Num(_) | Cell::Null => s.serialize_none(),
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Bool(b) => s.serialize_bool(*b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: Vec<String>) -> Self {
        Table {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(
            row.len(),
            self.columns.len(),
            "row width in table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Column names `prefix_1 .. prefix_l`.
pub fn indexed(prefix: &str, l: usize) -> Vec<String> {
    (1..=l).map(|k| format!("{prefix}_{k}")).collect()
}

/// What a command produces. The first table is the primary one.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Payload {
    pub summary: Map<String, Value>,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
}

impl Payload {
    pub fn set(&mut self, key: &str, v: impl Serialize) {
        let value = serde_json::to_value(v).unwrap_or(Value::Null);
        self.summary.insert(key.to_string(), value);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub tolerances: ToleranceSpec,
    /// Only with `--timing`; omitted by default so reports are reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEnvelope {
    pub schema_version: String,
    pub command: Command,
    pub config: RunConfig,
    pub payload: Payload,
    pub provenance: Provenance,
}

impl ReportEnvelope {
    pub fn new(command: Command, config: RunConfig, payload: Payload) -> Self {
        let tolerances = config.tolerances;
        ReportEnvelope {
            schema_version: SCHEMA_VERSION.to_string(),
            command,
            config,
            payload,
            provenance: Provenance {
                version: env!("CARGO_PKG_VERSION").to_string(),
                tolerances,
                wall_time_s: None,
            },
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// One CSV document per table, in payload order, keyed by table name.
    pub fn to_csv(&self) -> CliResult<Vec<(String, String)>> {
        self.payload
            .tables
            .iter()
            .map(|t| Ok((t.name.clone(), t.to_csv()?)))
            .collect()
    }

    /// Writes the report. JSON goes to one file; CSV writes the primary table
    /// to `path` and every other table next to it as `<stem>.<table>.csv`.
    /// Without a path the JSON document, or the primary CSV table, goes to
    /// stdout. Returns the files written.
    pub fn emit(&self, format: Format, path: Option<&Path>) -> CliResult<Vec<PathBuf>> {
        match (format, path) {
            (Format::Json, None) => {
                write_stdout(&self.to_json()?)?;
                Ok(Vec::new())
            }
            (Format::Json, Some(p)) => {
                std::fs::write(p, self.to_json()?)?;
                Ok(vec![p.to_path_buf()])
            }
            (Format::Csv, None) => {
                if let Some((_, text)) = self.to_csv()?.into_iter().next() {
                    write_stdout(&text)?;
                }
                Ok(Vec::new())
            }
            (Format::Csv, Some(p)) => {
                let mut written = Vec::new();
                for (i, (name, text)) in self.to_csv()?.into_iter().enumerate() {
                    let target = if i == 0 {
                        p.to_path_buf()
                    } else {
                        table_path(p, &name)
                    };
                    std::fs::write(&target, text)?;
                    written.push(target);
                }
                Ok(written)
            }
        }
    }
}

/// A closed pipe (`igeoflow ... | head`) is not an error.
fn write_stdout(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// `out/run.csv` + `constants` -> `out/run.constants.csv`.
pub fn table_path(primary: &Path, table: &str) -> PathBuf {
    let stem = primary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    primary.with_file_name(format!("{stem}.{table}.csv"))
}
