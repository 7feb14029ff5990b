use std::path::Path;
use std::process::{Command, Output};

fn smash(data: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smash"));
    cmd.env_remove("SMASH_DATA_DIR").env_remove("RUST_BACKTRACE").env_remove("RUST_LIB_BACKTRACE");
    if let Some(d) = data {
        cmd.arg("--data").arg(d);
    }
    cmd.args(args).output().expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn first_query(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("queries.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v[0]["sql"].as_str().unwrap().to_string()
}

#[test]
fn parse_needs_no_data() {
    let out = ok(smash(None, &["parse", "--json", "SELECT MIN(r.a) FROM R r, S s WHERE r.a = s.a"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["tables"].as_array().unwrap().len(), 2);
}

#[test]
fn malformed_sql_fails_with_message() {
    let out = smash(None, &["parse", "SELECT"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn missing_data_dir_is_reported() {
    let out = smash(None, &["jointree", "SELECT MIN(r.a) FROM R r"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("SMASH_DATA_DIR"));
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let d = dir.to_str().unwrap();
    let file = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let quick = ["--repeats", "1", "--timeout", "10"];

    ok(smash(None, &["generate", "--out", d, "--queries", "40"]));
    assert!(dir.join("queries.json").is_file());
    let q = first_query(dir);

    let tree = ok(smash(Some(dir), &["jointree", &q]));
    assert!(tree.contains("0MA:"));
    let seq = ok(smash(Some(dir), &["rewrite", &q]));
    assert!(seq.contains("CREATE UNLOGGED TABLE"));
    let feats = ok(smash(Some(dir), &["features", "--csv", &q]));
    assert_eq!(feats.lines().count(), 2);

    let runlog = file("runlog.json");
    ok(smash(Some(dir), &[&quick[..], &["run", "--out", &runlog]].concat()));
    let selector = file("selector.json");
    let csv = file("dataset.csv");
    ok(smash(Some(dir), &["train", "--runlog", &runlog, "--out", &selector, "--dataset", &csv]));
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 1);

    let choice = ok(smash(Some(dir), &["decide", &q, "--selector", &selector]));
    assert!(choice.starts_with("Original") || choice.starts_with("Rewritten"), "{choice}");

    let report = file("report.json");
    let table = ok(smash(Some(dir), &["e2e", "--selector", &selector, "--runlog", &runlog, "--all", "--out", &report]));
    assert!(table.contains("OracleBest"));
    let sig = ok(smash(None, &["significance", "--input", &report, "--a", "Base", "--b", "SMASH"]));
    assert!(sig.contains("Base vs SMASH"));

    let bad = smash(None, &["significance", "--input", &report, "--a", "Nope"]);
    assert!(!bad.status.success());
}

#[test]
fn query_from_stdin() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_smash"))
        .args(["parse", "-"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"SELECT r.a FROM R r").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
}
