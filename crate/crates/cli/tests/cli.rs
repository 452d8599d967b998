//! End-to-end checks of the command-line harness.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fixlag")
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn fixlag")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn ar1_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.json");
    write(
        &path,
        &format!(
            r#"{{
  "model": {{"kind": "ar1", "a": 0.8, "sigma_w": 0.5, "sigma_v": 2.0}},
  "n": 40,
  "smoother": {{"n_particles": 64, "kind": "fixed_lag_weighted", "lag": {{"fixed": 8}},
               "resampler": "systematic", "schedule": "every_step"}}{extra}
}}"#
        ),
    );
    path
}

#[test]
fn simulate_writes_dataset_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = ar1_config(dir.path(), "");
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        run_ok(&["simulate", "--config", config.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()]);
    }
    let d1 = fs::read(out1.join("dataset.csv")).unwrap();
    let d2 = fs::read(out2.join("dataset.csv")).unwrap();
    assert_eq!(d1, d2);
    assert_eq!(d1.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count(), 42); // header + 41 rows
    assert!(out1.join("dataset.meta.json").exists());

    // n = 0: a single time-0 row.
    let out3 = dir.path().join("c");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--seed", "7", "--out", out3.to_str().unwrap(), "--n", "0"]);
    let d3 = fs::read_to_string(out3.join("dataset.csv")).unwrap();
    assert_eq!(d3.lines().count(), 2);
}

#[test]
fn smooth_reduction_and_exact_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = ar1_config(dir.path(), "");
    let data = dir.path().join("data");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--seed", "1", "--out", data.to_str().unwrap()]);
    let dataset = data.join("dataset.csv");

    // trajectory and fixed-lag with lag >= n agree exactly under one seed
    let traj_cfg = dir.path().join("traj.json");
    write(
        &traj_cfg,
        r#"{
  "model": {"kind": "ar1", "a": 0.8, "sigma_w": 0.5, "sigma_v": 2.0},
  "smoother": {"n_particles": 64, "kind": "trajectory_weighted", "lag": {"fixed": 1},
               "resampler": "systematic", "schedule": "every_step"}
}"#,
    );
    let lag_cfg = dir.path().join("lag.json");
    write(
        &lag_cfg,
        r#"{
  "model": {"kind": "ar1", "a": 0.8, "sigma_w": 0.5, "sigma_v": 2.0},
  "smoother": {"n_particles": 64, "kind": "fixed_lag_weighted", "lag": {"fixed": 4000},
               "resampler": "systematic", "schedule": "every_step"}
}"#,
    );
    let out_t = dir.path().join("t");
    let out_l = dir.path().join("l");
    run_ok(&["smooth", "--config", traj_cfg.to_str().unwrap(), "--seed", "5", "--out", out_t.to_str().unwrap(), "--dataset", dataset.to_str().unwrap()]);
    run_ok(&["smooth", "--config", lag_cfg.to_str().unwrap(), "--seed", "5", "--out", out_l.to_str().unwrap(), "--dataset", dataset.to_str().unwrap()]);
    let rec_t: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_t.join("smooth.json")).unwrap()).unwrap();
    let rec_l: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_l.join("smooth.json")).unwrap()).unwrap();
    assert_eq!(rec_t["estimate"], rec_l["estimate"]);
    assert!(rec_t["exact"].is_array(), "AR(1) records carry the Kalman exact value");
    assert!(rec_t["abs_error"].is_array());
    // error field is recomputable from the record
    let est = rec_t["estimate"][0].as_f64().unwrap();
    let exact = rec_t["exact"][0].as_f64().unwrap();
    let err = rec_t["abs_error"][0].as_f64().unwrap();
    assert!((err - (est - exact).abs()).abs() < 1e-12);

    // SV smoothing carries no exact field
    let sv_cfg = dir.path().join("sv.json");
    write(
        &sv_cfg,
        r#"{
  "model": {"kind": "sv", "beta": 0.63, "alpha": 0.975, "sigma": 0.16},
  "n": 30,
  "smoother": {"n_particles": 32, "kind": "fixed_lag_weighted", "lag": {"fixed": 8},
               "resampler": "systematic", "schedule": "every_step"}
}"#,
    );
    let sv_data = dir.path().join("svdata");
    run_ok(&["simulate", "--config", sv_cfg.to_str().unwrap(), "--seed", "2", "--out", sv_data.to_str().unwrap()]);
    let out_sv = dir.path().join("sv");
    run_ok(&["smooth", "--config", sv_cfg.to_str().unwrap(), "--seed", "3", "--out", out_sv.to_str().unwrap(), "--dataset", sv_data.join("dataset.csv").to_str().unwrap()]);
    let rec_sv: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_sv.join("smooth.json")).unwrap()).unwrap();
    assert!(rec_sv["exact"].is_null());

    // model/dataset mismatch is a configuration error (exit code 1)
    let out_bad = dir.path().join("bad");
    let out = run(&["smooth", "--config", sv_cfg.to_str().unwrap(), "--seed", "3", "--out", out_bad.to_str().unwrap(), "--dataset", dataset.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_lags_row_counts_and_replicate_edge() {
    let dir = tempfile::tempdir().unwrap();
    let config = ar1_config(dir.path(), r#", "bench_lags": {"lags": [2, 8, 40], "replicates": 5}"#);
    let out = dir.path().join("bench");
    run_ok(&["bench-lags", "--config", config.to_str().unwrap(), "--seed", "11", "--out", out.to_str().unwrap()]);
    let text = fs::read_to_string(out.join("bench_lags.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 1 + 3 * 5 + 3);
    assert_eq!(rows.iter().filter(|r| r.starts_with("summary")).count(), 3);
    assert!(out.join("bench_lags.meta.json").exists());

    // replicates = 1: std cell is empty in the summary rows
    let out1 = dir.path().join("bench1");
    run_ok(&["bench-lags", "--config", config.to_str().unwrap(), "--seed", "11", "--out", out1.to_str().unwrap(), "--replicates", "1"]);
    let text = fs::read_to_string(out1.join("bench_lags.csv")).unwrap();
    for line in text.lines().filter(|r| r.starts_with("summary")) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[7], "", "std must be reported as absent: {line}");
    }
}

#[test]
fn bench_scaling_needs_replication() {
    let dir = tempfile::tempdir().unwrap();
    let config = ar1_config(
        dir.path(),
        r#", "bench_scaling": {"particles": [32, 64, 128], "replicates": 12}"#,
    );
    let out_bad = dir.path().join("bad");
    let out = run(&["bench-scaling", "--config", config.to_str().unwrap(), "--seed", "1", "--out", out_bad.to_str().unwrap(), "--replicates", "1"]);
    assert_eq!(out.status.code(), Some(1));

    let out_ok = dir.path().join("ok");
    run_ok(&["bench-scaling", "--config", config.to_str().unwrap(), "--seed", "1", "--out", out_ok.to_str().unwrap()]);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_ok.join("bench_scaling.meta.json")).unwrap()).unwrap();
    assert!(meta["fitted_slope"].is_number());
    let text = fs::read_to_string(out_ok.join("bench_scaling.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn mcem_oracle_trace_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("em.json");
    write(
        &config,
        r#"{
  "model": {"kind": "ar1", "a": 0.98, "sigma_w": 0.2, "sigma_v": 1.0},
  "n": 150,
  "smoother": {"n_particles": 50, "kind": "fixed_lag_weighted", "lag": {"fixed": 8},
               "resampler": "systematic", "schedule": "every_step"},
  "mcem": {"iterations": 15, "warm_iterations": 10, "warm_particles": 50, "final_particles": 100,
           "theta0": {"a": 0.5, "sigma_w": 1.0, "sigma_v": 0.5}, "oracle": true, "seeds": 1}
}"#,
    );
    let data = dir.path().join("data");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--seed", "3", "--out", data.to_str().unwrap()]);
    let out = dir.path().join("em");
    run_ok(&["mcem", "--config", config.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap(), "--dataset", data.join("dataset.csv").to_str().unwrap()]);
    let text = fs::read_to_string(out.join("mcem_trace_0.csv")).unwrap();
    let lls: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(9).unwrap().parse().unwrap())
        .collect();
    assert_eq!(lls.len(), 15);
    for w in lls.windows(2) {
        assert!(w[1] - w[0] >= -1e-8, "oracle EM log-likelihood decreased");
    }
    assert!(out.join("mcem_summary.csv").exists());
}

#[test]
fn mcem_sv_desk_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sv_em.json");
    write(
        &config,
        r#"{
  "model": {"kind": "sv", "beta": 0.63, "alpha": 0.975, "sigma": 0.16, "proposal": "optimal"},
  "n": 120,
  "smoother": {"n_particles": 50, "kind": "fixed_lag_weighted", "lag": {"fixed": 10},
               "resampler": "systematic", "schedule": "every_step"},
  "mcem": {"iterations": 8, "warm_iterations": 5, "warm_particles": 40, "final_particles": 80,
           "theta0": {"beta": 1.0, "alpha": 0.9, "sigma": 0.4}, "seeds": 2}
}"#,
    );
    let data = dir.path().join("data");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--seed", "5", "--out", data.to_str().unwrap()]);
    let out = dir.path().join("em");
    run_ok(&["mcem", "--config", config.to_str().unwrap(), "--seed", "6", "--out", out.to_str().unwrap(), "--dataset", data.join("dataset.csv").to_str().unwrap()]);
    for s in 0..2 {
        let text = fs::read_to_string(out.join(format!("mcem_trace_{s}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 9);
        for line in text.lines().skip(1) {
            for cell in line.split(',').take(6).skip(2) {
                let v: f64 = cell.parse().unwrap();
                assert!(v.is_finite());
            }
        }
    }
}

#[test]
fn degeneracy_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("deg.json");
    write(
        &config,
        r#"{
  "model": {"kind": "ar1", "a": 0.9, "sigma_w": 1.0, "sigma_v": 0.5},
  "degeneracy": {"n_particles": 30, "n": 0, "resampler": "multinomial"}
}"#,
    );
    let out = dir.path().join("d0");
    run_ok(&["degeneracy", "--config", config.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    let text = fs::read_to_string(out.join("degeneracy.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().ends_with(",30"));

    // never-resampling keeps the full ancestry
    let config2 = dir.path().join("deg2.json");
    write(
        &config2,
        r#"{
  "model": {"kind": "ar1", "a": 0.9, "sigma_w": 1.0, "sigma_v": 0.5},
  "degeneracy": {"n_particles": 30, "n": 50, "resampler": "multinomial", "schedule": "never"}
}"#,
    );
    let out2 = dir.path().join("d1");
    run_ok(&["degeneracy", "--config", config2.to_str().unwrap(), "--seed", "1", "--out", out2.to_str().unwrap()]);
    let text = fs::read_to_string(out2.join("degeneracy.csv")).unwrap();
    assert_eq!(text.lines().count(), 52);
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",30"), "unexpected collapse without resampling: {line}");
    }
}

#[test]
fn missing_config_is_a_config_error() {
    let out = run(&["simulate", "--config", "/nonexistent.json", "--seed", "1", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(1));
}
