//! End-to-end harness tests: the subprocess worker protocol against the real
//! bundled worker binary, failure handling for misbehaving workers, and
//! tune-mode resume.

use std::path::{Path, PathBuf};

use carbs_cli::config::TuneConfig;
use carbs_cli::runner::{self, RunDir, OBSERVATIONS_FILE};

fn worker_bin() -> &'static str {
    env!("CARGO_BIN_EXE_carbs")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("carbs-harness-{tag}-{}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn sphere_config(worker_command: String, budget: f64, max_evaluations: u64) -> TuneConfig {
    let text = format!(
        r#"
[harness]
parallelism = 2
worker_command = "{worker_command}"
wall_clock_budget = {budget}
max_evaluations = {max_evaluations}

[optimizer]
seed = 3
n_init = 4

[[search_space]]
name = "x0"
space_type = "linear"
search_center = 0.0

[[search_space]]
name = "x1"
space_type = "linear"
search_center = 0.0

[[search_space]]
name = "x2"
space_type = "linear"
search_center = 0.0
"#
    );
    TuneConfig::parse(&text).unwrap()
}

fn read_log(dir: &Path) -> Vec<runner::ObservationRecord> {
    RunDir::open(dir).unwrap().read_observations().unwrap()
}

#[test]
fn quadratic_worker_end_to_end() {
    let dir = temp_dir("quadratic");
    let run = dir.join("run");
    let cmd = format!(
        "{} worker --problem quadratic --suggestion {{suggestion_file}} --result {{result_file}}",
        worker_bin()
    );
    let config = sphere_config(cmd, 120.0, 14);
    runner::run_tune(&config, &run).unwrap();

    let records = read_log(&run);
    assert_eq!(records.len(), 14);
    assert!(records.iter().all(|r| !r.is_failure));
    // the worker reports the problem's own (constant) cost
    assert!(records.iter().all(|r| r.cost == 1.0));
    // every suggestion id is unique
    let mut ids: Vec<u64> = records.iter().map(|r| r.suggestion_id).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), 14);
    // reports are present and the front is non-empty
    let pareto = std::fs::read_to_string(run.join("pareto.csv")).unwrap();
    assert!(pareto.lines().count() >= 2, "pareto.csv has no data rows");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn omitted_cost_falls_back_to_wall_clock() {
    let dir = temp_dir("omit-cost");
    let run = dir.join("run");
    let cmd = format!(
        "{} worker --problem quadratic --omit-cost --suggestion {{suggestion_file}} --result {{result_file}}",
        worker_bin()
    );
    let config = sphere_config(cmd, 60.0, 4);
    runner::run_tune(&config, &run).unwrap();
    let records = read_log(&run);
    assert_eq!(records.len(), 4);
    // wall-clock cost: positive and definitely not the problem's constant 1.0
    assert!(records.iter().all(|r| r.cost > 0.0 && r.cost != 1.0));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn garbage_worker_becomes_failure_observations() {
    let dir = temp_dir("garbage");
    let run = dir.join("run");
    let config = sphere_config(
        "sh -c 'cat {suggestion_file} > /dev/null; echo not-json > {result_file}'".into(),
        60.0,
        3,
    );
    runner::run_tune(&config, &run).unwrap();
    let records = read_log(&run);
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.is_failure));
    let diagnostics = std::fs::read_to_string(run.join("diagnostics.log")).unwrap();
    assert!(diagnostics.lines().count() >= 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn crashing_worker_is_recorded_and_run_continues() {
    let dir = temp_dir("crash");
    let run = dir.join("run");
    let config = sphere_config("sh -c 'cat {suggestion_file} > /dev/null; exit 3'".into(), 60.0, 3);
    runner::run_tune(&config, &run).unwrap();
    let records = read_log(&run);
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.is_failure && r.cost > 0.0));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn mismatched_result_id_is_rejected() {
    use std::os::unix::fs::PermissionsExt;
    let dir = temp_dir("bad-id");
    let run = dir.join("run");
    // a worker that always claims suggestion_id 999
    let script = dir.join("liar.sh");
    std::fs::write(
        &script,
        "#!/bin/sh\ncat \"$1\" > /dev/null\nprintf '{\"suggestion_id\": 999, \"output\": 1.0, \"cost\": 1.0}\\n' > \"$2\"\n",
    )
    .unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    let config = sphere_config(
        format!("{} {{suggestion_file}} {{result_file}}", script.display()),
        60.0,
        2,
    );
    runner::run_tune(&config, &run).unwrap();
    let records = read_log(&run);
    assert_eq!(records.len(), 2);
    assert!(records.iter().all(|r| r.is_failure));
    let diagnostics = std::fs::read_to_string(run.join("diagnostics.log")).unwrap();
    assert!(diagnostics.contains("does not match"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn tune_resume_continues_without_duplicating_ids() {
    let dir = temp_dir("resume");
    let run = dir.join("run");
    let cmd = format!(
        "{} worker --problem quadratic --suggestion {{suggestion_file}} --result {{result_file}}",
        worker_bin()
    );
    // phase 1: capped at 6 evaluations
    let config = sphere_config(cmd.clone(), 300.0, 6);
    runner::run_tune(&config, &run).unwrap();
    let prefix = std::fs::read(run.join(OBSERVATIONS_FILE)).unwrap();
    assert_eq!(prefix.iter().filter(|&&b| b == b'\n').count(), 6);

    // raise the cap in the stored manifest, then resume
    let manifest_path = run.join("run.toml");
    let manifest = std::fs::read_to_string(&manifest_path).unwrap();
    std::fs::write(&manifest_path, manifest.replace("max_evaluations = 6", "max_evaluations = 12"))
        .unwrap();
    runner::resume_tune(&run).unwrap();

    let full = std::fs::read(run.join(OBSERVATIONS_FILE)).unwrap();
    assert!(full.starts_with(&prefix), "resume must not rewrite the observed prefix");
    let records = read_log(&run);
    assert_eq!(records.len(), 12);
    let mut ids: Vec<u64> = records.iter().map(|r| r.suggestion_id).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), 12, "resume repeated a suggestion id");
    std::fs::remove_dir_all(&dir).ok();
}
