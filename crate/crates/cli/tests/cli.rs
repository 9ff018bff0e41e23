use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn radonlaw(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radonlaw"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn simulate_writes_one_trajectory_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(
        &[
            "simulate",
            "--flux",
            "power:-1",
            "--datum",
            "dirac:0:1",
            "--n",
            "64,256,1024",
            "--T",
            "2",
            "--out",
            "runs",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = json(&out);
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    for (r, n) in runs.iter().zip([64, 256, 1024]) {
        assert_eq!(r["level"], n);
        assert!(r["max_relative_mass_drift"].as_f64().unwrap() < 1e-12);
        let path = dir
            .path()
            .join("runs")
            .join(r["trajectory"].as_str().unwrap());
        let text = fs::read_to_string(path).unwrap();
        assert!(text.starts_with("t,x,u\n"));
    }
    assert!(dir.path().join("runs/summary.json").exists());
}

#[test]
fn missing_config_field_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"flux": {"kind": "power", "p": -1}, "levels": [64], "horizon": 1}"#,
    )
    .unwrap();
    let out = radonlaw(&["simulate", "--config", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("datum"));
}

#[test]
fn unknown_config_field_and_check_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"flux": {"kind": "power", "p": -1}, "datum": [{"kind": "dirac", "x": 0, "mass": 1}], "levels": [64], "horizon": 1, "colour": 3}"#,
    )
    .unwrap();
    assert_eq!(
        radonlaw(&["simulate", "--config", "c.json"], dir.path())
            .status
            .code(),
        Some(2)
    );
    let out = radonlaw(
        &[
            "verify",
            "--flux",
            "power:-1",
            "--datum",
            "dirac:0:1",
            "--n",
            "64",
            "--T",
            "1",
            "--checks",
            "magic",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_fields() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"flux": {"kind": "power", "p": -1}, "datum": [{"kind": "dirac", "x": 0, "mass": 1}], "levels": [64, 128], "horizon": 1, "output_dir": "a"}"#,
    )
    .unwrap();
    let out = radonlaw(
        &["simulate", "--config", "c.json", "--n", "32", "--out", "b"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = json(&out);
    assert_eq!(s["config"]["levels"], serde_json::json!([32]));
    assert!(dir.path().join("b/trajectory_n32.csv").exists());
    assert!(!dir.path().join("a").exists());
}

#[test]
fn unbounded_flux_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(
        &[
            "simulate",
            "--flux",
            "power:0.5",
            "--datum",
            "dirac:0:1",
            "--n",
            "64,128",
            "--T",
            "0.1",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn waiting_time_recipe_reports_unit_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(&["verify", "--recipe", "prop11-waiting-time"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(r["pass"], true);
    let check = &r["recipes"][0]["checks"][0];
    assert!(check["margin"].as_f64().unwrap() >= 0.0);
    assert!(r["recipes"][0]["claim"]
        .as_str()
        .unwrap()
        .contains("t0 = 1"));
}

#[test]
fn nonuniqueness_recipe_discriminates() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(
        &["verify", "--recipe", "nonuniqueness", "--report", "r.json"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r, json(&out));
    let series = r["recipes"][0]["checks"][0]["evidence_series"]
        .as_array()
        .unwrap();
    let get = |label: &str| -> Vec<f64> {
        let s = series.iter().find(|s| s["label"] == label).unwrap();
        s["y"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect()
    };
    let (bound, exact, witness) = (get("bound"), get("exact"), get("frozen witness"));
    for k in 0..4 {
        assert!((bound[k] - exact[k]).abs() <= 1e-8);
        assert!(witness[k] < 0.9 * bound[k]);
    }
}

#[test]
fn unknown_recipe_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(&["verify", "--recipe", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_one_and_names_the_margin() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(
        &[
            "verify",
            "--flux",
            "linear:1",
            "--datum",
            "box:0:0.5:1",
            "--n",
            "4",
            "--T",
            "0.5",
            "--checks",
            "mass,hypotheses",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["pass"], false);
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks[0]["pass"], true);
    assert_eq!(checks[1]["pass"], false);
    assert!(checks[1]["margin"].is_number());
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL flux hypotheses"));
}

#[test]
fn module_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(
        &[
            "verify",
            "--flux",
            "linear:1",
            "--datum",
            "dirac:0:1",
            "--n",
            "16",
            "--T",
            "0.5",
            "--checks",
            "aronson-benilan",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_reports_are_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "verify",
        "--flux",
        "power:-1",
        "--datum",
        "dirac:0:1",
        "--n",
        "32,64,128",
        "--T",
        "2",
        "--snapshots",
        "20",
        "--checks",
        "mass,entropy,singular-mass",
        "--seed",
        "7",
        "--out",
        "o",
    ];
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_radonlaw"))
            .args(args)
            .current_dir(dir.path())
            .env("RADONLAW_WORKERS", workers)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("4"));
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(a.stdout, b.stdout);
    let bad = run("zero");
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn exact_samples_the_fan() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(
        &["exact", "--p", "-1", "--t", "0.5", "--xs", "0.1:0.5:0.05"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,u_r,atom_mass,xi"));
    let mut count = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let (t, x, u): (f64, f64, f64) = (
            cols[0].parse().unwrap(),
            cols[1].parse().unwrap(),
            cols[2].parse().unwrap(),
        );
        let expected = if x < t { (t / x).sqrt() - 1.0 } else { 0.0 };
        assert!((u - expected).abs() < 1e-12, "x = {x}: {u} vs {expected}");
        count += 1;
    }
    assert_eq!(count, 9);
}

#[test]
fn exact_rejects_bad_positions() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(
        &["exact", "--p", "-1", "--t", "0.5", "--xs", "1:0:0.1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_gives_unit_waiting_time_for_every_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(
        &[
            "sweep",
            "--p",
            "-0.25,-0.5,-1,-2",
            "--quantity",
            "t0",
            "--format",
            "json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = json(&out);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!((r["t0"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!((r["lower"].as_f64().unwrap() - r["upper"].as_f64().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn sweep_singular_mass_decays_linearly() {
    let dir = tempfile::tempdir().unwrap();
    let out = radonlaw(
        &[
            "sweep",
            "--p",
            "-1",
            "--quantity",
            "singular-mass",
            "--times",
            "0.25,1.5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "p,t,singular_mass\n-1,0.25,0.75\n-1,1.5,0\n");
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        radonlaw(&["sweep", "--quantity", "t0"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        radonlaw(&["sweep", "--p", "", "--quantity", "t0"], dir.path())
            .status
            .code(),
        Some(2)
    );
}
