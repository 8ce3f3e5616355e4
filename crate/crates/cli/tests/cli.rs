use std::path::Path;
use std::process::{Command, Output};

use pathheat::config::{Params, Suite};
use pathheat::report::Report;

fn pathheat(args: &[&str], config: Option<&Path>, out: &Path, seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pathheat"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    match seed_env {
        Some(s) => cmd.env("PATHHEAT_SEED", s),
        None => cmd.env_remove("PATHHEAT_SEED"),
    };
    cmd.output().unwrap()
}

fn read_report(dir: &Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const SMALL_INTEGRATE: &str = r#"{ "cases": 5, "n_steps": 128 }"#;

#[test]
fn shipped_configs_parse() {
    for s in [Suite::Integrate, Suite::Cylindrical, Suite::FlowCheck, Suite::Smooth, Suite::ClarkOcone, Suite::All] {
        Params::parse(s, s.default_config(), s.name()).unwrap();
    }
}

#[test]
fn shipped_defaults_match_builtin_defaults() {
    let all = Params::parse(Suite::All, Suite::All.default_config(), "all").unwrap();
    let empty = Params::parse(Suite::All, "{}", "empty").unwrap();
    assert_eq!(all, empty);
}

#[test]
fn malformed_json_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"cases\": 5,\n  \"n_steps\": \n}").unwrap();
    let out = dir.path().join("out");
    let o = pathheat(&["integrate"], Some(&cfg), &out, None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4"), "{err}");
    assert!(!out.join("report.json").exists());
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{ "cases": 5, "n_stepz": 64 }"#).unwrap();
    let o = pathheat(&["integrate"], Some(&cfg), &dir.path().join("out"), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_stepz"));
}

#[test]
fn invalid_value_is_rejected() {
    let err = Params::parse(Suite::Smooth, r#"{ "n_paths": 0 }"#, "cfg").unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("n_paths"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathheat(&["heat"], None, dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn env_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    std::fs::write(&cfg, SMALL_INTEGRATE).unwrap();
    let out = dir.path().join("out");
    let o = pathheat(&["integrate", "--seed", "3"], Some(&cfg), &out, Some("77"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_report(&out);
    assert_eq!(r.environment.seed, 77);
    assert_eq!(r.schema, 1);
    assert!(r.pass);
    assert!(out.join("integrate_cases.csv").exists());

    let o = pathheat(&["integrate", "--seed", "3"], Some(&cfg), &out, None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_report(&out).environment.seed, 3);
}

#[test]
fn failing_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.json");
    std::fs::write(&cfg, r#"{ "cases": 3, "min_slope": 5.0 }"#).unwrap();
    let out = dir.path().join("out");
    let o = pathheat(&["integrate"], Some(&cfg), &out, None);
    assert_eq!(o.status.code(), Some(1));
    let r = read_report(&out);
    assert!(!r.pass);
    assert!(r.checks.iter().any(|c| c.name == "eps_slope" && !c.pass));
}

#[test]
fn module_error_becomes_failed_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fbm.json");
    // Hurst index outside the supported range
    std::fs::write(
        &cfg,
        r#"{ "cases": [ { "label": "bad", "solver": { "type": "cylindrical",
              "basis": [{ "kind": "constant", "value": 1.0 }], "payoff": { "name": "square" } },
              "driver": { "kind": "BROWNIAN_PLUS_FBM", "sigma": 1.0, "hurst": 0.3 },
              "n_steps": 16, "n_paths": 10, "tolerance": 1.0 } ] }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = pathheat(&["clark-ocone"], Some(&cfg), &out, None);
    assert_eq!(o.status.code(), Some(1));
    let r = read_report(&out);
    assert_eq!(r.checks.len(), 1);
    assert!(r.checks[0].error.as_deref().unwrap().contains("invalid"));
}

#[test]
fn explicit_integral_scenario() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("f.csv"),
        (0..=4).fold(String::from("x,value\n"), |s, k| {
            let x = -1.0 + 0.25 * k as f64;
            s + &format!("{x},{}\n", x * x)
        }),
    )
    .unwrap();
    let cfg = dir.path().join("int.json");
    std::fs::write(
        &cfg,
        r#"{ "n_steps": 4, "cases": 1, "scenarios": [
              { "name": "lebesgue", "mu": { "density": { "kind": "constant", "value": 1.0 } },
                "f": { "kind": "csv", "file": "f.csv" }, "interval": [-1.0, 0.0], "mode": "OPEN" },
              { "name": "atom", "mu": { "atoms": [{ "x": -0.5, "weight": 2.0 }] },
                "f": { "kind": "csv", "file": "f.csv" }, "interval": [-1.0, 0.0], "mode": "OPEN" } ] }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = pathheat(&["integrate"], Some(&cfg), &out, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("integrate.json")).unwrap()).unwrap();
    // ∫_{]-1,0]} d(x²) = f(0) - f(-1)
    assert!((v[0]["value"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(v[0]["method"], "CLOSED_FORM");
    // 2 · f'(-0.5+) with f piecewise linear: slope on [-0.5,-0.25] is -0.75
    assert!((v[1]["value"].as_f64().unwrap() + 1.5).abs() < 1e-9, "{}", v[1]);
    assert_eq!(v[1]["method"], "EPS_LIMIT");
    assert!(!v[1]["eps_table"].as_array().unwrap().is_empty());
}
