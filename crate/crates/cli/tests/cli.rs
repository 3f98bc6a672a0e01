use std::fs;
use std::process::Command;

const SMALL: &str = r#"
[domain]
nx = 8
ny = 8
nb = 8

[space]
n = 4

[time]
final_time = 0.05
dt = 0.0125

[diagnostics]
battery_random = 2
"#;

fn slipflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slipflow"))
}

#[test]
fn run_verify_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("art");
    let status = slipflow().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let status = slipflow().arg("verify").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));

    let ledger = out.join("ledger.csv");
    let bytes = fs::read(&ledger).unwrap();
    fs::write(&ledger, &bytes[..bytes.len() - 10]).unwrap();
    let status = slipflow().arg("verify").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(5));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[pressure]\ngamma = 1.0\n[regularization]\ndelta = 0.0\n").unwrap();
    let out = slipflow()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("pressure.gamma") && err.contains("regularization.delta"), "{err}");
}

#[test]
fn missing_config_exits_5() {
    let status = slipflow()
        .args(["run", "--config", "/nonexistent/run.toml", "--out", "/nonexistent/out"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(5));
}

#[test]
fn conjugate_table_rows() {
    let out = slipflow()
        .args(["conjugate-table", "--kind", "newtonian", "--grid", "-1:1:3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 27);
}
