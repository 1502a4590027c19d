use std::fs;
use std::process::Command;

fn tool() -> Command {
    Command::new(env!("CARGO_BIN_EXE_taylor-audit"))
}

#[test]
fn writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = tool()
        .args(["remainder-audit", "--n", "5", "--seed", "9", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("remainder_audit.csv")).unwrap();
    assert!(csv.starts_with("x,closed_form,quadrature,abs_diff\n"));
    assert_eq!(csv.lines().count(), 6);
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.seed=9\n"));
    assert!(manifest.contains("config.n=5\n"));
    let sum = manifest.lines().find(|l| l.starts_with("sha256 ")).unwrap();
    let parts: Vec<&str> = sum.split(' ').collect();
    assert_eq!(parts.len(), 3);
    assert_eq!(parts[1].len(), 64);
    assert_eq!(parts[2], "remainder_audit.csv");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "experiment=expand-eval\n# comment\nn=4\na3=1.5\n").unwrap();
    let out = tool()
        .arg("--config")
        .arg(&cfg)
        .args(["--n", "3", "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/expand_eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

fn stderr_of(args: &[&str]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let out = tool().args(args).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    String::from_utf8(out.stderr).unwrap()
}

#[test]
fn errors_are_reported_with_codes() {
    assert!(stderr_of(&["heat-bench", "--k", "abc"]).starts_with("ERROR type-mismatch: "));
    assert!(stderr_of(&["no-such"]).starts_with("ERROR unknown-experiment: "));
    assert!(stderr_of(&["heat-bench", "--mu", "1"]).starts_with("ERROR key-not-allowed: "));
    assert!(stderr_of(&["expand-eval", "--a3", "-1"]).starts_with("ERROR domain: "));
    assert!(stderr_of(&["remainder-audit", "--c", "0"]).starts_with("ERROR zero-expansion-point: "));
}

#[test]
fn no_arguments_prints_usage() {
    let out = tool().output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("portfolio-bench"));
}
