//! The acceptance suite as a command: the engine's criteria plus the
//! determinism and schema check, which needs the report layer.

use igeoflow_core::verification::{run_all, CriterionResult};

use crate::commands::run_command;
use crate::config::{
    Command, EmbeddingConfig, GridSpec, RunConfig, Spacing, SweepParameter, SweepSpec,
};
use crate::error::CliResult;
use crate::report::{Payload, ReportEnvelope, Table};
use crate::schema::{validate_csv, validate_json};
use crate::sweep::cmd_sweep;

/// Small configs for every report-producing command.
pub fn sample_configs() -> Vec<(Command, RunConfig)> {
    let base = RunConfig::default();
    let mut out = Vec::new();
    for command in [
        Command::Curvature,
        Command::Geodesic,
        Command::Complexity,
        Command::Jacobi,
    ] {
        let mut c = base.clone();
        c.resolve(command);
        out.push((command, c));
    }
    let mut two = base.clone();
    two.params.r = vec![0.3, 0.8];
    two.params.lambda = vec![1.0, 0.5];
    two.params.xi = vec![8.0, 1.0];
    two.resolve(Command::Geodesic);
    out.push((Command::Geodesic, two));

    let mut embed = base.clone();
    embed.embedding = Some(EmbeddingConfig {
        linear: Some([1.0, 2.0]),
        tabulated: None,
        point: [0.4, 1.3],
        h: 1e-4,
        kink_tol: 0.1,
    });
    out.push((Command::Embed, embed));

    let mut sweep = base;
    sweep.grid = Some(GridSpec {
        start: 1.0,
        stop: 1e4,
        count: 41,
        spacing: Spacing::Log,
    });
    sweep.sweep = Some(SweepSpec {
        command: Command::Complexity,
        parameter: SweepParameter::R,
        values: vec![0.3, 0.5, 0.8],
    });
    out.push((Command::Sweep, sweep));
    out
}

fn render(
    command: Command,
    config: &RunConfig,
    jobs: Option<usize>,
) -> CliResult<(String, Vec<(String, String)>)> {
    let payload = match command {
        Command::Sweep => cmd_sweep(config, jobs)?,
        c => run_command(c, config)?,
    };
    let env = ReportEnvelope::new(command, config.clone(), payload);
    Ok((env.to_json()?, env.to_csv()?))
}

fn check_rendering(command: Command, config: &RunConfig) -> Result<(), String> {
    let (json_a, csv_a) = render(command, config, Some(1)).map_err(|e| e.to_string())?;
    // the second run uses a different pool size to shake out ordering effects
    let (json_b, csv_b) = render(command, config, Some(4)).map_err(|e| e.to_string())?;
    if json_a != json_b || csv_a != csv_b {
        return Err(format!("{}: repeated runs differ", command.name()));
    }
    validate_json(&json_a).map_err(|e| format!("{}: {e}", command.name()))?;
    for (table, text) in &csv_a {
        validate_csv(command, table, config.params.l(), text)
            .map_err(|e| format!("{}: {e}", command.name()))?;
    }
    let echo: serde_json::Value = serde_json::from_str(&json_a).map_err(|e| e.to_string())?;
    let back: RunConfig =
        serde_json::from_value(echo["config"].clone()).map_err(|e| e.to_string())?;
    if &back != config {
        return Err(format!(
            "{}: config echo does not round-trip",
            command.name()
        ));
    }
    Ok(())
}

pub fn criteria_payload(results: &[CriterionResult]) -> Payload {
    let mut t = Table::new(
        "criteria",
        ["id", "name", "passed", "detail"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    );
    for r in results {
        t.push(vec![
            (r.id as usize).into(),
            r.name.as_str().into(),
            r.passed.into(),
            r.detail.as_str().into(),
        ]);
    }
    let mut p = Payload::default();
    p.set("criteria", results.len());
    p.set("passed", results.iter().filter(|r| r.passed).count());
    p.tables = vec![t];
    p
}

fn verify_report(results: &[CriterionResult]) -> CliResult<(String, String)> {
    let env = ReportEnvelope::new(
        Command::Verify,
        RunConfig::default(),
        criteria_payload(results),
    );
    let csv = env.to_csv()?.remove(0).1;
    Ok((env.to_json()?, csv))
}

/// Repeated runs give byte-identical reports that validate against the
/// schema. `first` is a completed run of the other criteria, compared with a
/// fresh one.
pub fn determinism(first: &[CriterionResult]) -> CriterionResult {
    let mut problems = Vec::new();
    let mut checked = 0;
    for (command, config) in sample_configs() {
        checked += 1;
        if let Err(e) = check_rendering(command, &config) {
            problems.push(e);
        }
    }
    match (verify_report(first), verify_report(&run_all())) {
        (Ok(a), Ok(b)) => {
            if a != b {
                problems.push("verify: repeated runs differ".into());
            }
            if let Err(e) =
                validate_json(&a.0).and_then(|_| validate_csv(Command::Verify, "criteria", 1, &a.1))
            {
                problems.push(format!("verify: {e}"));
            }
        }
        (Err(e), _) | (_, Err(e)) => problems.push(format!("verify: {e}")),
    }
    let passed = problems.is_empty();
    let detail = if passed {
        format!(
            "{} command reports and the verify report are byte-identical across runs and validate",
            checked
        )
    } else {
        problems.join("; ")
    };
    CriterionResult {
        id: 11,
        name: "determinism and schema".into(),
        passed,
        detail,
    }
}

/// All eleven criteria.
pub fn run_criteria() -> Vec<CriterionResult> {
    let mut results = run_all();
    let d = determinism(&results);
    results.push(d);
    results
}
