use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn washout(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_washout"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Unique solution of `A x + d = 0` for `A = A0 + D Δ E` with Δ = 1 and
/// `d = (1, 10)`, solved by hand: `A = [[0.2, 1], [1, 1]]`.
const XBAR: [f64; 2] = [-11.25, 1.25];

/// Last CSV row as numbers.
fn last_row(csv: &str) -> Vec<f64> {
    let line = csv.lines().last().unwrap();
    line.split(',').map(|s| s.parse().unwrap()).collect()
}

#[test]
fn synth_example_is_certified() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"bounds": {"T1": 0.5, "T2": 1.0}, "degree": 4}),
    );
    let o = washout(&["synth"], &cfg, &dir.path().join("out"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&dir.path().join("out/synth.json"));
    assert_eq!(v["certified"], json!(true));
    assert_eq!(v["result"]["status"], json!("Feasible"));
    assert_eq!(v["checks"]["certificate"]["grid_n"], json!(1001));
}

#[test]
fn synth_large_t2_degree_one_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({"bounds": {"T1": 0.1, "T2": 2.0}, "degree": 1}),
    );
    let o = washout(&["synth"], &cfg, &dir.path().join("out"));
    assert_eq!(code(&o), 2);
    let v = read_json(&dir.path().join("out/synth.json"));
    assert_eq!(v["certified"], json!(false));
}

#[test]
fn malformed_config_exits_one() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"bounds\": ").unwrap();
    let o = washout(&["synth"], &p, &dir.path().join("out"));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn unknown_keys_and_bad_values_exit_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    for (i, v) in [
        json!({"bounds": {"T1": 0.5, "T2": 1.0}, "degree": 4, "extra": 1}),
        json!({"bounds": {"T1": 0.5, "T2": 1.0, "T3": 2.0}, "degree": 4}),
        json!({"bounds": {"T1": 1.0, "T2": 0.5}, "degree": 4}),
        json!({"bounds": {"T1": 0.5, "T2": 1.0}}),
        json!({"bounds": {"T1": 0.5, "T2": 1.0}, "degree": 2, "synthesis": {"decay_rate": -1.0}}),
        json!({"bounds": {"T1": 0.5, "T2": 1.0}, "sweep": {"degrees": []}}),
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), v);
        let cmd = if i == 5 { "sweep" } else { "synth" };
        assert_eq!(code(&washout(&[cmd], &cfg, &out)), 1, "config {i}");
    }
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&washout(&["synth"], &missing, &out)), 1);
}

#[test]
fn sweep_single_degree_and_empty_bracket() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "one.json",
        &json!({"bounds": {"T1": 0.1, "T2": 0.2}, "sweep": {"degrees": [1], "hi": 1.0}}),
    );
    let out = dir.path().join("a");
    assert_eq!(code(&washout(&["sweep"], &cfg, &out)), 0);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "g,T2max");
    let t2: f64 = lines[1].strip_prefix("1,").unwrap().parse().unwrap();
    assert!(t2 > 0.1 && t2 < 1.0);

    let cfg = write_config(
        dir.path(),
        "none.json",
        &json!({"bounds": {"T1": 0.1, "T2": 0.2}, "sweep": {"degrees": [1], "lo": 1.5, "hi": 2.0}}),
    );
    let out = dir.path().join("b");
    assert_eq!(code(&washout(&["sweep"], &cfg, &out)), 2);
    assert_eq!(
        std::fs::read_to_string(out.join("sweep.csv")).unwrap(),
        "g,T2max\n1,none\n"
    );
}

fn pipeline_config(dir: &Path, synth_out: &Path) -> PathBuf {
    write_config(
        dir,
        "pipeline.json",
        &json!({
            "bounds": {"T1": 0.5, "T2": 1.0},
            "degree": 4,
            "synthesis": {"decay_rate": 0.05},
            "simulation": {
                "delta": [[1.0]],
                "d": [1.0, 10.0],
                "z0": [10.0, 1.0, 0.0, 0.0],
                "horizon": 60.0,
                "result": synth_out.join("synth.json"),
            },
            "verify": {"result": synth_out.join("synth.json")}
        }),
    )
}

#[test]
fn full_pipeline() {
    let dir = TempDir::new().unwrap();
    let synth_out = dir.path().join("synth");
    let cfg = pipeline_config(dir.path(), &synth_out);
    assert_eq!(code(&washout(&["synth"], &cfg, &synth_out)), 0);

    let out = dir.path().join("v");
    let o = washout(&["verify"], &cfg, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v = read_json(&out.join("verify.json"));
    assert!(v["oracle"]["max_rho"].as_f64().unwrap() < 1.0);

    let mut tails = Vec::new();
    let mut csvs = Vec::new();
    for seed in ["1", "2", "3"] {
        let out = dir.path().join(format!("sim{seed}"));
        let o = washout(&["simulate", "--seed", seed], &cfg, &out);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
        assert!(csv.starts_with("t,j,xp1,xp2,xi1,q1,tau,V\n"));
        let row = last_row(&csv);
        assert!((row[2] - XBAR[0]).abs() <= 1e-2, "x1 {}", row[2]);
        assert!((row[3] - XBAR[1]).abs() <= 1e-2, "x2 {}", row[3]);
        assert!(row[5].abs() <= 1e-2);
        tails.push(row);
        csvs.push(csv);
    }
    assert_ne!(csvs[0], csvs[1]);

    // Same seed, same bytes.
    let again = dir.path().join("again");
    assert_eq!(code(&washout(&["simulate", "--seed", "1"], &cfg, &again)), 0);
    assert_eq!(std::fs::read_to_string(again.join("trajectory.csv")).unwrap(), csvs[0]);
}

#[test]
fn verify_rejects_perturbed_gains() {
    let dir = TempDir::new().unwrap();
    let synth_out = dir.path().join("synth");
    let cfg = pipeline_config(dir.path(), &synth_out);
    assert_eq!(code(&washout(&["synth"], &cfg, &synth_out)), 0);
    let path = synth_out.join("synth.json");
    let mut v = read_json(&path);
    let c = &mut v["result"]["controller"];
    for key in ["G", "R", "Pi"] {
        for x in c[key][0].as_array_mut().unwrap() {
            *x = json!(x.as_f64().unwrap() + 10.0);
        }
    }
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let out = dir.path().join("v");
    assert_eq!(code(&washout(&["verify"], &cfg, &out)), 2);
    let r = read_json(&out.join("verify.json"));
    assert_eq!(r["passes"], json!(false));
}

#[test]
fn inline_controller_without_drift_goes_to_origin() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &json!({
            "simulation": {
                "z0": [10.0, 1.0, 0.0, 0.0],
                "horizon": 80.0,
                "schedule": {"kind": "periodic", "period": 0.75},
                "controller": {"Lambda": [[1.0521]], "Pi": [[-1.383, -2.1917]]}
            }
        }),
    );
    let out = dir.path().join("out");
    let o = washout(&["simulate"], &cfg, &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let row = last_row(&std::fs::read_to_string(out.join("trajectory.csv")).unwrap());
    assert_eq!(row.len(), 7, "no V column without a certificate");
    assert!(row[2..6].iter().all(|v| v.abs() <= 1e-2), "{row:?}");

    // a random schedule needs bounds
    let cfg = write_config(
        dir.path(),
        "r.json",
        &json!({"simulation": {"controller": {"Lambda": [[1.0521]], "Pi": [[-1.383, -2.1917]]}}}),
    );
    assert_eq!(code(&washout(&["simulate"], &cfg, &out)), 1);
}

#[test]
fn simulate_without_controller_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &json!({"bounds": {"T1": 0.5, "T2": 1.0}}));
    assert_eq!(code(&washout(&["simulate"], &cfg, &dir.path().join("out"))), 1);
}
