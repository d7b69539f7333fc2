use igeoflow::commands::run_command;
use igeoflow::report::{format_float, ReportEnvelope};
use igeoflow::schema::{validate_csv, validate_json};
use igeoflow::verify::sample_configs;
use igeoflow::{Command, RunConfig};

/// Parses back what `format_float` wrote.
fn shortest_round_trip(v: f64) -> bool {
    format_float(v)
        .parse::<f64>()
        .map(|p| p.to_bits() == v.to_bits())
        .unwrap_or(false)
}

fn curvature_report() -> String {
    let mut config = RunConfig::default();
    config.resolve(Command::Curvature);
    let payload = run_command(Command::Curvature, &config).unwrap();
    ReportEnvelope::new(Command::Curvature, config, payload)
        .to_json()
        .unwrap()
}

#[test]
fn sample_reports_validate() {
    for (command, config) in sample_configs() {
        let payload = match command {
            Command::Sweep => igeoflow::sweep::cmd_sweep(&config, Some(2)).unwrap(),
            c => run_command(c, &config).unwrap(),
        };
        let env = ReportEnvelope::new(command, config.clone(), payload);
        validate_json(&env.to_json().unwrap()).unwrap();
        for (table, text) in env.to_csv().unwrap() {
            validate_csv(command, &table, config.params.l(), &text).unwrap();
        }
    }
}

#[test]
fn config_echo_round_trips() {
    let text = curvature_report();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let back: RunConfig = serde_json::from_value(v["config"].clone()).unwrap();
    let mut expected = RunConfig::default();
    expected.resolve(Command::Curvature);
    assert_eq!(back, expected);
}

#[test]
fn json_validator_rejects_broken_reports() {
    let good: serde_json::Value = serde_json::from_str(&curvature_report()).unwrap();

    let mut v = good.clone();
    v["schema_version"] = "0.9".into();
    assert!(validate_json(&v.to_string()).is_err());

    let mut v = good.clone();
    v["payload"]["tables"][0]["rows"][0]
        .as_array_mut()
        .unwrap()
        .pop();
    assert!(validate_json(&v.to_string()).unwrap_err().contains("cells"));

    let mut v = good.clone();
    v["payload"]["tables"][0]["columns"][1] = "rho".into();
    assert!(validate_json(&v.to_string())
        .unwrap_err()
        .contains("documented"));

    let mut v = good.clone();
    v["payload"]["tables"].as_array_mut().unwrap().pop();
    assert!(validate_json(&v.to_string()).is_err());

    let mut v = good.clone();
    v["extra"] = 1.into();
    assert!(validate_json(&v.to_string()).is_err());

    let mut v = good;
    v["config"]["params"]["r"] = "half".into();
    assert!(validate_json(&v.to_string())
        .unwrap_err()
        .contains("round-trip"));
}

#[test]
fn csv_validator_rejects_broken_tables() {
    let header = "id,name,passed,detail\n";
    assert!(validate_csv(
        Command::Verify,
        "criteria",
        1,
        &format!("{header}1,x,true,ok\n")
    )
    .is_ok());
    assert!(validate_csv(Command::Verify, "criteria", 1, "1,x,true,ok\n").is_err());
    assert!(validate_csv(
        Command::Verify,
        "criteria",
        1,
        &format!("{header}one,x,true,ok\n")
    )
    .is_err());
    assert!(validate_csv(
        Command::Verify,
        "criteria",
        1,
        &format!("{header}1,x,true\n")
    )
    .is_err());
    // empty cells are nulls
    assert!(validate_csv(Command::Embed, "embedding", 1, "mu,sigma,d_mu,d_sigma,a_mumu,a_musigma,a_sigmasigma,r_analytic,r_oracle,delta\n0,1,0,0,1,0,2,0,,0\n").is_ok());
}

#[test]
fn floats_round_trip_exactly() {
    for v in [
        0.1,
        1.0 / 3.0,
        1e-300,
        5e-324,
        1.7976931348623157e308,
        -2.5,
        0.0,
        123456789.0,
    ] {
        assert!(shortest_round_trip(v), "{v}");
    }
    assert_eq!(format_float(0.5), "0.5");
    assert_eq!(format_float(f64::NAN), "NaN");
}
