use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn qng(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qng"))
        .args(args)
        .env("QNG_OUTPUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_outputs_to_the_override_directory() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("line");
    let res = qng(&["run", config("paper-cournot-line.json").to_str().unwrap()], &out);
    assert!(res.status.success(), "{}", stderr(&res));
    for file in ["actions.csv", "errors.csv", "summary.json"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    let summary = json(out.join("summary.json"));
    assert_eq!(summary["convergence_step"], 4);
    assert_eq!(summary["diameter"], 4);
    assert!(summary["final_nash_gap"].as_f64().unwrap() < 1e-6);
    let actions = fs::read_to_string(out.join("actions.csv")).unwrap();
    let mut lines = actions.lines();
    assert_eq!(lines.next(), Some("t,agent,component,value"));
    // 11 rounds of 5 agents.
    assert_eq!(lines.count(), 55);
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().next(), Some("t,agent,sq_error"));
}

#[test]
fn zero_horizon_gives_single_round_csvs() {
    let tmp = TempDir::new().unwrap();
    let path = write_config(
        tmp.path(),
        r#"{"scenario": "cournot", "graph": {"kind": "ring", "n": 4},
            "params": {"price": 12, "noise_var": 1}, "horizon": 0}"#,
    );
    let out = tmp.path().join("out");
    let res = qng(&["run", path.to_str().unwrap()], &out);
    assert!(res.status.success(), "{}", stderr(&res));
    let actions = fs::read_to_string(out.join("actions.csv")).unwrap();
    let rows: Vec<&str> = actions.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.starts_with("0,")));
    assert!(rows[0].starts_with("0,1,1,"));
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 5);
}

#[test]
fn self_coupling_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let path = write_config(
        tmp.path(),
        r#"{"scenario": "custom-scalar", "graph": {"kind": "path", "n": 2},
            "params": {"beta": [[0.2, 0.1], [0.1, 0]], "delta": 1, "theta": 1, "noise_var": 1}}"#,
    );
    let res = qng(&["run", path.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("params.beta[0][0]"), "{}", stderr(&res));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn missing_config_file_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let res = qng(&["run", tmp.path().join("absent.json").to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("absent.json"));
}

#[test]
fn nonexistent_equilibrium_exits_with_the_failing_step() {
    let tmp = TempDir::new().unwrap();
    let res = qng(&["run", config("no-equilibrium.json").to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(3));
    let msg = stderr(&res);
    assert!(msg.contains("no linear equilibrium at step 0"), "{msg}");
}

#[test]
fn sweep_over_twenty_seeds_converges_at_the_diameter() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sweep");
    let res = qng(
        &[
            "sweep",
            config("paper-cournot-line.json").to_str().unwrap(),
            "--seeds",
            "0..=19",
        ],
        &out,
    );
    assert!(res.status.success(), "{}", stderr(&res));
    let sweep = json(out.join("sweep.json"));
    let runs = sweep["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 20);
    assert!(runs.iter().all(|r| r["convergence_step"] == 4), "{runs:?}");
    assert_eq!(sweep["aggregate"]["completed"], 20);
    assert_eq!(sweep["aggregate"]["convergence_histogram"]["4"], 20);
    assert!(out.join("seed-19").join("summary.json").is_file());
}

#[test]
fn single_seed_sweep_matches_a_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("paper-cournot-star.json");
    let sweep_out = tmp.path().join("sweep");
    let res = qng(&["sweep", cfg.to_str().unwrap(), "--seeds", "1"], &sweep_out);
    assert!(res.status.success(), "{}", stderr(&res));
    let run_out = tmp.path().join("run");
    let res = qng(&["run", cfg.to_str().unwrap()], &run_out);
    assert!(res.status.success(), "{}", stderr(&res));
    let single = json(run_out.join("summary.json"));
    let agg = &json(sweep_out.join("sweep.json"))["aggregate"];
    assert_eq!(agg["max_final_nash_gap"], single["final_nash_gap"]);
    assert_eq!(agg["max_action_gap"], single["max_action_gap"]);
    assert_eq!(
        fs::read(sweep_out.join("seed-1").join("summary.json")).unwrap(),
        fs::read(run_out.join("summary.json")).unwrap()
    );
}

#[test]
fn empty_seed_list_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("paper-cournot-line.json");
    let res = qng(&["sweep", cfg.to_str().unwrap(), "--seeds", "5..5"], tmp.path());
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("seeds"), "{}", stderr(&res));
    let res = qng(&["sweep", cfg.to_str().unwrap(), "--seeds", "3,3"], tmp.path());
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn graph_info_reports_shape() {
    let tmp = TempDir::new().unwrap();
    let res = qng(
        &["graph-info", config("paper-cournot-star.json").to_str().unwrap()],
        tmp.path(),
    );
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("agents: 5"));
    assert!(text.contains("edges: 4"));
    assert!(text.contains("diameter: 2"));
    let res = qng(
        &[
            "graph-info",
            config("paper-cournot-ring.json").to_str().unwrap(),
            "--json",
        ],
        tmp.path(),
    );
    let info: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(info["diameter"], 5);
    assert_eq!(info["degree"]["min"], 2);
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("paper-cournot-ring.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(qng(&["run", cfg.to_str().unwrap()], &a).status.success());
    assert!(qng(&["run", cfg.to_str().unwrap()], &b).status.success());
    for file in ["actions.csv", "errors.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}
