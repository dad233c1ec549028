use std::path::Path;
use std::process::Command;

use plateflow::record::{load_snapshot, load_timeseries};

const QUICK: &str = "n = 4\ndt = 5e-3\nt_end = 0.1\nsample_interval = 0.05\nsnapshots = \"samples\"\n\n[dtn]\nnx = 32\nnz = 33\n\n[initial]\npreset = \"random-smooth\"\nseed = 3\n";

fn plateflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plateflow"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn verify_quick_passes() {
    let out = plateflow().args(["verify", "--level", "quick"]).output().unwrap();
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{table}");
    assert!(table.lines().skip(1).all(|l| l.ends_with("PASS")), "{table}");
}

#[test]
fn run_with_missing_config_fails() {
    let out = plateflow().args(["run", "missing.toml"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing.toml") && err.contains("No such file"), "{err}");
}

#[test]
fn run_with_invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 8\n[dtn]\nnz = 66\n");
    let out = plateflow().arg("run").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dtn.nz") && err.contains("line 3"), "{err}");
}

#[test]
fn run_writes_records_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out_dir = dir.path().join("out");
    let out = plateflow().arg("run").arg(&cfg).arg("--output").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = load_timeseries(&out_dir.join("timeseries.jsonl")).unwrap();
    assert_eq!(rec.rows.len(), 3);
    assert_eq!(rec.header.steps, 20);
    assert!(rec.rows.windows(2).all(|w| w[1].t > w[0].t));
    assert!(rec.rows.iter().all(|r| r.get("energy_drift").unwrap() < 1e-7));
    let last = load_snapshot(&out_dir.join("snapshot_00002.plwv")).unwrap();
    assert_eq!(last.n, 4);
    assert!((last.t - 0.1).abs() < 1e-12);
}

#[test]
fn thread_limit_must_be_positive() {
    let out = plateflow().args(["verify"]).env("PLATEFLOW_THREADS", "zero").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("PLATEFLOW_THREADS"));
}

#[test]
fn converge_with_one_truncation_has_no_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 4\ndt = 1e-2\nt_end = 0.05\n[dtn]\nnz = 33\n");
    let out_dir = dir.path().join("conv");
    let out = plateflow()
        .arg("converge")
        .arg(&cfg)
        .args(["--truncations", "4", "--output"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(table.lines().count(), 1, "{table}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("convergence.json")).unwrap()).unwrap();
    assert_eq!(report["pairs"].as_array().unwrap().len(), 0);
    assert!(out_dir.join("member_n4.json").exists());
}

#[test]
fn converge_rejects_unsorted_truncations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dt = 1e-3\n");
    let out = plateflow().arg("converge").arg(&cfg).args(["--truncations", "8,4"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncations"));
}
