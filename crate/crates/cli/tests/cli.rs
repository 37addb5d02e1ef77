//! End-to-end tests of the command-line contract: exit codes, artifact
//! layout, determinism of summaries, and the check registry listing.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbm-lab"))
}

fn run_with_config(text: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg_path = dir.join("exp.cfg");
    fs::write(&cfg_path, text).unwrap();
    bin()
        .arg("run")
        .arg("--config")
        .arg(&cfg_path)
        .args(extra)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn tiny_config(name: &str, checks: &str, replicas: usize) -> String {
    format!(
        r#"
[experiment]
name = {name}
seed = 7
replicas = {replicas}
backend = both
output_dir = out
checks = {checks}

[lattice]
length = 22.0
dx = 0.1
t_max = 0.5
observation_times = 0.25, 0.5

[particles]
mass_resolution = 50

[sheet]
scale_n = 4
grid_t = 0.25, 0.5
grid_x = 0.5, 1.0

[fdd]
times = 0.5, 0.25
xs = 1.0, 1.0
thetas = 1.0, 1.0
"#
    )
}

#[test]
fn list_checks_contains_registry_anchors() {
    let out = bin().arg("list-checks").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("laplace_functional \u{2192} Eq. (2.1)"),
        "{text}"
    );
    assert!(
        text.contains("covariance_sheet \u{2192} Theorem 1.1"),
        "{text}"
    );
    let n_checks = text.lines().filter(|l| l.contains('\u{2192}')).count();
    assert!(n_checks >= 10, "only {n_checks} checks listed");
}

#[test]
fn missing_seed_exits_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config(
        "[experiment]\nname = x\nchecks = lemma21_quadrature\n",
        dir.path(),
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("seed required"), "{err}");
}

#[test]
fn unknown_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config(
        "[experiment]\nname = x\nseed = 5\nchecks = not_a_check\n",
        dir.path(),
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("not_a_check"), "{err}");
}

#[test]
fn deterministic_suite_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[experiment]\nname = det\nseed = 3\noutput_dir = out\nchecks = lemma21_quadrature, log_laplace_constant\n";
    let out = run_with_config(cfg, dir.path(), &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out_dir = dir.path().join("out");
    assert!(out_dir.join("summary.json").is_file());
    assert!(out_dir.join("manifest.json").is_file());
    let csv = fs::read_to_string(out_dir.join("lemma21_quadrature.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "test_name,params,estimate,se,target_finite_n,target_limit,verdict"
    );
    assert!(csv.lines().count() > 1);
    // pass/fail lines on stdout, one per check
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("PASS lemma21_quadrature"), "{stdout}");

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], serde_json::Value::Bool(true));
    assert_eq!(summary["experiment"], "det");
}

#[test]
fn summary_bytes_identical_across_reruns() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let cfg = tiny_config(
        "rerun",
        "mean_functional, covariance_sheet, fdd_laplace",
        120,
    );
    let out_a = run_with_config(&cfg, dir_a.path(), &[]);
    let out_b = run_with_config(&cfg, dir_b.path(), &[]);
    assert_eq!(out_a.status.code(), out_b.status.code());
    let sum_a = fs::read(dir_a.path().join("out/summary.json")).unwrap();
    let sum_b = fs::read(dir_b.path().join("out/summary.json")).unwrap();
    assert_eq!(sum_a, sum_b, "summary.json differs between identical runs");
    // and the per-check CSVs are byte-identical too
    let csv_a = fs::read(dir_a.path().join("out/covariance_sheet.csv")).unwrap();
    let csv_b = fs::read(dir_b.path().join("out/covariance_sheet.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn seed_override_changes_estimates() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let cfg = tiny_config("seeded", "mean_functional", 60);
    run_with_config(&cfg, dir_a.path(), &[]);
    run_with_config(&cfg, dir_b.path(), &["--seed", "12345"]);
    let csv_a = fs::read_to_string(dir_a.path().join("out/mean_functional.csv")).unwrap();
    let csv_b = fs::read_to_string(dir_b.path().join("out/mean_functional.csv")).unwrap();
    assert_ne!(csv_a, csv_b);
}

#[test]
fn replicas_override_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config("override", "mean_functional", 60);
    let out = run_with_config(&cfg, dir.path(), &["--replicas", "25"]);
    assert!(out.status.code() == Some(0) || out.status.code() == Some(2));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["replicas"], serde_json::Value::from(25));
}

#[test]
fn dump_fields_writes_replica_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config("dump", "mean_functional", 3);
    let out = run_with_config(&cfg, dir.path(), &["--dump-fields"]);
    assert!(out.status.code() == Some(0) || out.status.code() == Some(2));
    let fields = dir.path().join("out/fields");
    let names: Vec<String> = fs::read_dir(&fields)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 3);
    let first = fs::read_to_string(fields.join("fd_rep00000.csv")).unwrap();
    assert!(
        first.starts_with("t,x,u\n"),
        "{}",
        &first[..30.min(first.len())]
    );
    // one row per (time, cell) pair plus the header
    assert_eq!(first.lines().count(), 1 + 2 * 220);
}

#[test]
fn backend_gate_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config("gate", "particle_moments", 20).replace("backend = both", "backend = fd");
    let out = run_with_config(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("particle backend"), "{err}");
}
