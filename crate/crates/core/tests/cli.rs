use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn cazac() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cazac"))
}

fn run(args: &[&str]) -> Output {
    cazac().args(args).output().expect("binary runs")
}

fn run_with_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = cazac()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn without_timestamps(mut v: Value) -> Value {
    if let Some(m) = v.get_mut("manifest").and_then(Value::as_object_mut) {
        m.remove("started_unix_ms");
        m.remove("finished_unix_ms");
    }
    v
}

const FOUND_C0A_ROW: &str = r#"{"n": 8, "repr": "s", "values": [0.0, 4.346, 1.456, 2.566, 2.912, 6.566, 1.456, 0.346]}"#;

#[test]
fn p4_family_piped_into_verify_is_cazac() {
    let fam = run(&["family", "--name", "p4", "--n", "8"]);
    assert!(fam.status.success());
    let ver = run_with_stdin(&["verify"], &fam.stdout);
    assert_eq!(ver.status.code(), Some(0));
    let v = json(&ver);
    assert!(v["d"].as_f64().unwrap() < 1e-12);
    for key in ["d_ca", "d_zac", "rho_db", "upper_bound_db", "argmax_tau"] {
        assert!(!v[key].is_null(), "{key}");
    }
}

#[test]
fn generate_converges_or_signals_nonconvergence() {
    let out = run(&["--json-compact", "generate", "--n", "50", "--epsilon", "1e-3", "--seed", "7"]);
    let v = json(&out);
    match out.status.code() {
        Some(0) => {
            assert_eq!(v["converged"], Value::Bool(true));
            assert!(v["d"].as_f64().unwrap() <= 1e-3);
        }
        Some(3) => assert_eq!(v["converged"], Value::Bool(false)),
        other => panic!("unexpected exit {other:?}"),
    }
    assert_eq!(v["values"].as_array().unwrap().len(), 50);
}

#[test]
fn generated_sequence_reingests_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let out = run(&["generate", "--n", "16", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let stored: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let ver = run(&["verify", "--in", path.to_str().unwrap()]);
    let v = json(&ver);
    let rel = (v["d"].as_f64().unwrap() - stored["d"].as_f64().unwrap()).abs();
    assert!(rel < 1e-9, "{rel}");
}

#[test]
fn generate_is_reproducible_apart_from_timestamps() {
    let a = json(&run(&["generate", "--n", "12", "--seed", "11", "--count", "3"]));
    let b = json(&run(&["generate", "--n", "12", "--seed", "11", "--count", "3"]));
    assert_eq!(without_timestamps(a), without_timestamps(b));
}

#[test]
fn generate_writes_trajectory_csv_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("t.csv");
    let out = run(&[
        "generate",
        "--n",
        "10",
        "--count",
        "2",
        "--trajectory-out",
        traj.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("run_id,iteration,discrepancy\n"));
    let ids: std::collections::BTreeSet<String> = csv_rows(&text).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(ids.len(), 2);
    assert!(dir.path().join("t.csv.manifest.json").exists());
}

#[test]
fn classify_found_c0a_row_is_c0a_with_listed_witness() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("found_c0a.json");
    fs::write(&path, FOUND_C0A_ROW).unwrap();
    let v = json(&run(&["classify", "--in", path.to_str().unwrap()]));
    assert_eq!(v["class"], "C0a");
    let witnesses: Vec<&str> = v["witnesses"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect();
    assert!(witnesses.contains(&"C0.M2.D5.T0"), "{witnesses:?}");
    assert!(v["match_error"].as_f64().unwrap() <= 2e-2);
}

#[test]
fn classify_popovic_member_reports_row_and_theta() {
    let fam = run(&["family", "--name", "s8", "--set", "31", "--theta", "0.7"]);
    let v = json(&run_with_stdin(&["classify"], &fam.stdout));
    assert_eq!(v["class"], "P");
    assert_eq!(v["row"], 1);
    assert!((v["theta_hat"].as_f64().unwrap() - 0.7).abs() < 1e-6);
}

#[test]
fn classify_batch_emits_scatter_rows() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.json"), FOUND_C0A_ROW).unwrap();
    let c0b = run(&["family", "--name", "c0b", "--index", "3"]);
    fs::write(dir.path().join("b.json"), &c0b.stdout).unwrap();
    let out = run(&["classify", "--batch", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("file,theta1,theta5,theta2,theta3,class\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][5], "C0a");
    assert_eq!(rows[1][5], "C0b");
}

#[test]
fn malformed_csv_is_a_validation_error_naming_the_line() {
    let out = run_with_stdin(&["verify"], b"# n=3 repr=s\n0\nnot-a-number\n1\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["verify", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_parameters_are_validation_errors() {
    assert_eq!(run(&["family", "--name", "zc", "--n", "8", "--u", "2"]).status.code(), Some(2));
    assert_eq!(run(&["generate", "--n", "8", "--epsilon", "0"]).status.code(), Some(2));
}

#[test]
fn thread_cap_is_validated() {
    let ok = cazac().env("CAZAC_THREADS", "1").args(["family", "--name", "c0a"]).output().unwrap();
    assert!(ok.status.success());
    let bad = cazac().env("CAZAC_THREADS", "0").args(["family", "--name", "c0a"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn family_csv_output_round_trips_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zc.csv");
    let out = run(&["family", "--name", "zc", "--n", "13", "--u", "5", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# n=13 repr=s\n"));
    assert!(dir.path().join("zc.csv.manifest.json").exists());
    let v = json(&run(&["verify", "--in", path.to_str().unwrap()]));
    assert!(v["d"].as_f64().unwrap() < 1e-9);
}

#[test]
fn transform_chain_maps_found_row_to_c0a_representative() {
    let out = run_with_stdin(&["transform", "--chain", "C0.M2.D5.T0"], FOUND_C0A_ROW.as_bytes());
    assert!(out.status.success());
    let v = json(&out);
    let s: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let printed = [0.0, 0.566, 5.456, 6.346, 2.912, 6.346, 5.456, 0.566];
    // The chain fixes the pattern up to a global rotation.
    let shift = s[0];
    for (got, want) in s.iter().zip(printed) {
        let d = (got - shift - want).rem_euclid(8.0);
        assert!(d.min(8.0 - d) < 2e-3, "{s:?}");
    }
}

#[test]
fn solve_c0c_emits_triple_and_sequences() {
    let v = json(&run(&["solve-c0c"]));
    assert!((v["a"].as_f64().unwrap() - 0.1390361).abs() < 1e-6);
    assert!((v["b"].as_f64().unwrap() - 0.3487759).abs() < 1e-6);
    assert!((v["c"].as_f64().unwrap() - 0.0975818).abs() < 1e-6);
    assert!(v["residual_inf"].as_f64().unwrap() < 1e-8);
    let seqs = v["sequences"].as_array().unwrap();
    assert_eq!(seqs.len(), 8);
    for s in seqs {
        let file = serde_json::json!({ "n": 8, "repr": "s", "values": s });
        let ver = json(&run_with_stdin(&["verify"], file.to_string().as_bytes()));
        assert!(ver["d"].as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn optimize_radar_reports_ratio_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let hist = dir.path().join("h.csv");
    let out = run(&["optimize-radar", "--n", "7", "--steps", "5", "--history-out", hist.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    let rho = v["rho_db"].as_f64().unwrap();
    assert!(rho <= v["upper_bound_db"].as_f64().unwrap() + 1e-9);
    assert!(v["d"].as_f64().unwrap() <= 1e-3);
    let text = fs::read_to_string(&hist).unwrap();
    assert!(text.starts_with("step,temperature,current_rho_db,best_rho_db\n"));
}

#[test]
fn trajectory_export_default_has_twenty_positive_trajectories() {
    let out = run(&["figures", "fig1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("run_id,iteration,discrepancy\n"));
    let rows = csv_rows(&text);
    let ids: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(ids.len(), 20);
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn sweep_export_ratio_respects_bound() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig2.csv");
    let out = run(&["figures", "fig2", "--n-range", "2:16", "--steps", "10", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let rows = csv_rows(&fs::read_to_string(&path).unwrap());
    assert_eq!(rows.len(), 15);
    for r in rows {
        let rho: f64 = r[1].parse().unwrap();
        let bound: f64 = r[2].parse().unwrap();
        assert!(rho <= bound + 1e-9, "{r:?}");
    }
    assert!(Path::new(&format!("{}.manifest.json", path.display())).exists());
}

#[test]
fn scatter_export_converged_rows_carry_a_class() {
    let out = run(&["figures", "fig3", "--count", "500"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("run_id,converged,theta1,theta5,theta2,theta3,class\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 500);
    let mut unknown = 0;
    for r in rows.iter().filter(|r| r[1] == "true") {
        match r[6].as_str() {
            "P" | "C0a" | "C0b" | "C0c" => {}
            "Unknown" => unknown += 1,
            other => panic!("unexpected class {other}"),
        }
    }
    assert!(unknown <= 10, "{unknown} unknown rows");
}
