use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SWEEP: &str = "\
[run]
experiment = sweep-time
cycles = 2

[engine]
omega1 = 8
omega2 = 6
t_hot = 1.0
t_cold = 0.25

[grid]
t_tilde = 0.5:1.5:0.5
";

fn ottoforge(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("run.conf");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ottoforge"))
        .arg(&path)
        .args(["--output", dir.join("out").to_str().unwrap()])
        .args(extra)
        .output()
        .unwrap()
}

fn results(dir: &Path) -> String {
    fs::read_to_string(dir.join("out/results.csv")).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let first = TempDir::new().unwrap();
    let second = TempDir::new().unwrap();
    assert!(ottoforge(first.path(), SWEEP, &[]).status.success());
    assert!(ottoforge(second.path(), SWEEP, &["--jobs", "1"]).status.success());
    let text = results(first.path());
    assert_eq!(text, results(second.path()));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t_tilde,cycle,eta");
    assert_eq!(lines.len(), 1 + 3 * 2);
}

#[test]
fn manifest_records_config() {
    let dir = TempDir::new().unwrap();
    assert!(ottoforge(dir.path(), SWEEP, &["--dt", "0.0005"]).status.success());
    let manifest = fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("# experiment = sweep-time"));
    assert!(manifest.contains("# dt = 0.0005"));
    assert!(manifest.contains("# rows = 6"));
    assert!(manifest.contains("[grid]"));
}

#[test]
fn audit_adds_ledger_columns() {
    let dir = TempDir::new().unwrap();
    assert!(ottoforge(dir.path(), SWEEP, &["--audit"]).status.success());
    let text = results(dir.path());
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["t_tilde", "cycle", "eta", "q1", "w1", "q2", "w2", "first_law_residual"]
    );
    for record in reader.records() {
        let residual: f64 = record.unwrap()[7].parse().unwrap();
        assert!(residual.abs() < 1e-10);
    }
}

#[test]
fn invalid_occupation_is_rejected() {
    let dir = TempDir::new().unwrap();
    let config = "[run]\nexperiment = aux\n\n[engine]\nomega1 = 8\nomega2 = 6\nt_hot = 1\nt_cold = 0.25\nt_tilde = 1\n\n[grid]\nn = [0.5, 1.2]\n";
    let out = ottoforge(dir.path(), config, &[]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 12: `grid.n`") && stderr.contains("n <= 1.0"), "{stderr}");
    assert!(!dir.path().join("out/results.csv").exists());
}

#[test]
fn unknown_key_reports_line() {
    let dir = TempDir::new().unwrap();
    let out = ottoforge(dir.path(), "[engine]\nomega1 = 8\nomegaa2 = 6\n", &[]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn missing_config_fails() {
    let out = Command::new(env!("CARGO_BIN_EXE_ottoforge"))
        .arg("/nonexistent/run.conf")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: cannot read config"));
}

#[test]
fn zero_jobs_is_an_error() {
    let dir = TempDir::new().unwrap();
    let out = ottoforge(dir.path(), SWEEP, &["--jobs", "0"]);
    assert!(!out.status.success());
}
