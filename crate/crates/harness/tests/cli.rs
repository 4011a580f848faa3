use std::path::Path;
use std::process::{Command, Output};

use msgamp::scenario::{synthesize, ScenarioFile};
use msgamp::{Scenario64, SystemConfig};
use msgamp_harness::experiment;

fn msgamp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msgamp"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MSGAMP_OUT_DIR")
        .output()
        .expect("spawn msgamp")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "[system]\nn = 32\nm = 4\nl = 24\nseed = 3\nmax_iters = 10\n\n[experiment]\nsnr_grid_db = [10, 20]\nestimators = [\"hygamp\", \"msgamp-grbpp\", \"mmse\"]\ntrials = 3\n";

#[test]
fn run_writes_result_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let out = msgamp(&["run", "-c", "exp.toml", "-o", "res", "--quiet"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let res = dir.path().join("res");
    for f in [
        experiment::TRIALS_FILE,
        experiment::AGGREGATE_FILE,
        experiment::CONVERGENCE_FILE,
        experiment::STOPPING_FILE,
        experiment::METADATA_FILE,
    ] {
        assert!(res.join(f).is_file(), "missing {f}");
    }
    let trials = std::fs::read_to_string(res.join(experiment::TRIALS_FILE)).unwrap();
    // header + 3 estimators × 2 SNRs × 3 trials
    assert_eq!(trials.lines().count(), 1 + 18);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(res.join(experiment::METADATA_FILE)).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], experiment::SCHEMA_VERSION);
    assert_eq!(meta["root_seed"], 3);
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_msgamp"))
        .args(["run", "-c", "exp.toml", "--trials", "1", "--quiet"])
        .current_dir(dir.path())
        .env("MSGAMP_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("from-env").join(experiment::TRIALS_FILE).is_file());
}

#[test]
fn trial_prints_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = msgamp(
        &["trial", "--seed", "7", "--estimator", "msgamp-rbp", "--snr-db", "15", "--n", "32", "--m", "4", "--l", "24"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(msgamp::engine::IterationRecord::CSV_HEADER));
    let first: Vec<&str> = lines.next().expect("one iteration").split(',').collect();
    // iteration 1 sweeps every device
    assert_eq!(first[0], "1");
    assert_eq!(first[2], "32");
    assert!(stderr(&out).contains("aer="));
}

#[test]
fn unknown_estimator_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = msgamp(&["run", "--estimators", "hygamp,amp"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("msgamp-grbpp"), "{}", stderr(&out));
}

#[test]
fn bad_config_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[experiment]\ntrials = 2\n\n[system]\nl = 0\n").unwrap();
    let out = msgamp(&["run", "-c", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bad.toml") && err.contains(":5:"), "{err}");

    std::fs::write(dir.path().join("typo.toml"), "[experiment]\ntrails = 2\n").unwrap();
    let out = msgamp(&["run", "-c", "typo.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":2:"), "{}", stderr(&out));
}

#[test]
fn export_scenario_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = msgamp(
        &["export-scenario", "--seed", "11", "--snr-db", "12.5", "--n", "16", "--m", "2", "--l", "8", "-o", "s.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("s.json")).unwrap();
    let back: Scenario64 = ScenarioFile::from_json(&text).unwrap().into_scenario().unwrap();
    let cfg = SystemConfig { seed: 11, snr_db: 12.5, n: 16, m: 2, l: 8, ..SystemConfig::default() };
    assert_eq!(back, synthesize::<f64>(&cfg).unwrap());
}

#[test]
fn export_trial_matches_experiment_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), SMALL).unwrap();
    let out = msgamp(&["export-scenario", "-c", "exp.toml", "--trial", "2", "--snr-index", "1"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let back: Scenario64 = ScenarioFile::from_json(std::str::from_utf8(&out.stdout).unwrap())
        .unwrap()
        .into_scenario()
        .unwrap();
    let spec = msgamp_harness::config::load(&dir.path().join("exp.toml"), &Default::default()).unwrap();
    let expected = synthesize::<f64>(&experiment::trial_config(&spec, 1, 2)).unwrap();
    assert_eq!(back, expected);
}

#[test]
fn oracle_check_passes_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = msgamp(&["oracle-check", "--points", "50"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["points"], 50);
}
