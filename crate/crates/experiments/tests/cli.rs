use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use pim_experiments::ExperimentReport;

fn pim_uq(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pim-uq"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    if let Some(text) = stdin {
        child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    }
    drop(child.stdin.take());
    child.wait_with_output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_FIG1: &str = r#"{"fig1": {"sample_sizes": [8], "trials": 4}}"#;

#[test]
fn fig1_csv_rows_match_trials() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL_FIG1);
    let out = pim_uq(&["fig1", "--config", &cfg, "--format", "csv"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 10);
}

#[test]
fn reports_are_deterministic_and_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL_FIG1);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = pim_uq(&["fig1", "--seed", "9", "--config", &cfg, "--out", path.to_str().unwrap()], None);
        assert!(out.status.success());
        assert!(out.stdout.is_empty());
    }
    let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(ta, tb);
    let report = ExperimentReport::from_json(&ta).unwrap();
    assert_eq!((report.schema_version, report.seed, report.protocol.as_str()), (1, 9, "fig1"));
    assert_eq!(report.determinism_hash, report.content_hash());
}

#[test]
fn fit_quantile_reads_stdin() {
    let out = pim_uq(&["fit-quantile", "--p", "0.5", "--format", "csv"], Some("1\n2\n\n3\n4\n5\n"));
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "p,r_hat\n0.5,3\n");

    let numbers: String = (1..=200).map(|i| format!("{}\n", i as f64 / 10.0 - 10.0)).collect();
    let out = pim_uq(&["fit-quantile", "--mode", "split-sign"], Some(&numbers));
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["estimate"]["kind"], "split");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"p": 1.5}"#);
    let out = pim_uq(&["fig1", "--config", &bad], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p must lie in (0, 1)"));

    let unknown = write(dir.path(), "unknown.json", r#"{"fig1": {"trails": 3}}"#);
    assert_eq!(pim_uq(&["fig1", "--config", &unknown], None).status.code(), Some(2));
    assert_eq!(pim_uq(&["fit-quantile", "--p", "0"], Some("1\n")).status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = pim_uq(&["uci", missing.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let blank = write(dir.path(), "blank.csv", "x,y\n1,2\n3,\n");
    let out = pim_uq(&["uci", &blank], None);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3, column 2"));

    let labels = write(dir.path(), "labels.csv", "x,label\n0.1,0\n0.2,2\n0.3,1\n");
    assert_eq!(pim_uq(&["classify", &labels], None).status.code(), Some(3));
    assert_eq!(pim_uq(&["fit-quantile"], Some("1\noops\n")).status.code(), Some(3));
}

#[test]
fn numerical_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..60).map(|i| format!("{},{}\n", i % 7, (i * 3) % 11)).collect();
    let data = write(dir.path(), "d.csv", &format!("x,y\n{rows}"));
    let cfg = write(dir.path(), "cfg.json", r#"{"uci": {"shuffles": 2, "train": {"epochs": 2, "learning_rate": 1e200}}}"#);
    let out = pim_uq(&["uci", &data, "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_loadable_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = pim_uq(&["synth", "--dir", dir.path().to_str().unwrap(), "--rows", "300", "--features", "2"], None);
    assert!(out.status.success());
    for name in ["heteroskedastic", "homoskedastic", "logistic"] {
        let text = std::fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 301);
    }
    let cfg = write(dir.path(), "cfg.json", r#"{"classify": {"shuffles": 1, "bootstrap": 2, "train": {"epochs": 5}}}"#);
    let logistic = dir.path().join("logistic.csv");
    let out = pim_uq(&["classify", logistic.to_str().unwrap(), "--config", &cfg], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
