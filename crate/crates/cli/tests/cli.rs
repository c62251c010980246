use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn faithdiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faithdiag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, main_endpoint: &str) -> String {
    let path = dir.join("run.toml");
    let body = format!(
        r#"seed = 1
out_dir = "out"

[datasets.factcheck]
generate = 12

[endpoints.main]
{main_endpoint}

[endpoints.helper]
kind = "mock"

[endpoints.simulator]
kind = "mock"

[[metrics]]
metric = "cot"
corruption = {{ kind = "filler", filler_kind = "dots" }}

[[metrics]]
metric = "random"

[diagnosticity]
resamples = 100
"#
    );
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn gen_data_writes_jsonl() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = faithdiag(&["gen-data", "--task", "objectcount", "--n", "7", "--out", out]);
    assert!(o.status.success(), "{o:?}");
    let files: Vec<_> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(files.len(), 1);
    let rows = fs::read_to_string(&files[0]).unwrap();
    assert_eq!(rows.lines().count(), 7);
    for line in rows.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["task"], "objectcount");
    }
}

#[test]
fn eval_then_report_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"kind = "mock""#);
    let o = faithdiag(&["eval", "--config", &cfg, "--offline"]);
    assert!(o.status.success(), "{o:?}");
    let manifest: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(manifest["n_failed"], 0);
    let out = dir.path().join("out");
    let reports = out.join("reports.json");
    assert!(reports.exists());
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(table.starts_with("metric,category,factcheck"));

    let rerendered = dir.path().join("again");
    let o = faithdiag(&["report", "--reports", reports.to_str().unwrap(), "--out", rerendered.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(fs::read_to_string(rerendered.join("table.csv")).unwrap(), table);
}

#[test]
fn copeland_default_uses_reference_table() {
    let o = faithdiag(&["copeland"]);
    assert!(o.status.success(), "{o:?}");
    let scores: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(scores["filler_tokens"], 29.0);
    assert_eq!(scores["simulatability"], 3.0);
}

#[test]
fn invalid_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "seed = 0\n").unwrap();
    let o = faithdiag(&["eval", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{o:?}");
}

#[test]
fn malformed_input_exits_3() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{ not json").unwrap();
    let o = faithdiag(&["copeland", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
}

#[test]
fn unreachable_endpoint_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "kind = \"remote\"\nbase_url = \"http://127.0.0.1:9\"\ntimeout_secs = 2\nretries = 0\nbackoff_ms = 0",
    );
    let o = faithdiag(&["eval", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(4), "{o:?}");
}
