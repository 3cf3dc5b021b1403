//! End-to-end tests of the configuration pipeline and the binary.

use ilcbench::config::{parse_config, ConfigError};
use ilcbench::experiment::{run_experiment, EXIT_DIVERGED, EXIT_OK};
use std::path::{Path, PathBuf};
use std::process::Command;

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn load(name: &str) -> ilcbench::config::ExperimentConfig {
    let text = std::fs::read_to_string(repo_config(name)).unwrap();
    parse_config(&text).unwrap()
}

#[test]
fn canonical_config_round_trips() {
    let text = std::fs::read_to_string(repo_config("printer.json")).unwrap();
    let cfg = parse_config(&text).unwrap();
    let serialized = serde_json::to_string(&cfg).unwrap();
    let reparsed = parse_config(&serialized).unwrap();
    assert_eq!(cfg, reparsed);
}

#[test]
fn canonical_config_matches_programmatic_scenario() {
    let cfg = load("printer.json");
    let built = cfg.build_scenario().unwrap();
    let canonical = ilcbench_core::plant::default_printer_scenario();
    assert_eq!(built, canonical);
    let (_, record) = cfg.build_reference().unwrap();
    assert_eq!(record, ilcbench_core::plant::default_printer_reference());
}

#[test]
fn negative_mass_names_the_field() {
    let mut text = std::fs::read_to_string(repo_config("printer.json")).unwrap();
    text = text.replace("\"mass_kg\": 0.25", "\"mass_kg\": -1.0");
    match parse_config(&text) {
        Err(ConfigError::Invalid(violations)) => {
            assert!(violations
                .iter()
                .any(|v| v.field.contains("mass_kg") && v.message.contains("positive")));
        }
        other => panic!("expected violation list, got {other:?}"),
    }
}

#[test]
fn all_violations_are_collected() {
    let mut text = std::fs::read_to_string(repo_config("printer.json")).unwrap();
    text = text.replace("\"mass_kg\": 0.25", "\"mass_kg\": -1.0");
    text = text.replace("\"kp\": 200.0", "\"kp\": 0.0");
    text = text.replace("\"alpha\": 1.0", "\"alpha\": 2.0");
    match parse_config(&text) {
        Err(ConfigError::Invalid(violations)) => {
            assert!(violations.len() >= 3, "got {violations:?}");
        }
        other => panic!("expected violation list, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let mut text = std::fs::read_to_string(repo_config("printer.json")).unwrap();
    text = text.replace("\"ts_s\": 0.001", "\"ts_s\": 0.001, \"mystery_knob\": 3");
    assert!(parse_config(&text).is_err());
}

#[test]
fn syntax_errors_carry_line_and_column() {
    match parse_config("{\n  \"scenario\": [,\n}") {
        Err(ConfigError::Syntax { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected syntax error, got {other:?}"),
    }
}

#[test]
fn divergent_config_reports_first_rising_task_and_exit_code() {
    let cfg = load("printer_divergent.json");
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&cfg, dir.path(), None, true).unwrap();
    assert_eq!(outcome.exit_code, EXIT_DIVERGED);
    assert!(outcome.summary.diverged_at_task.is_some());
    assert!(outcome.summary.first_rising_task.is_some());
    let run_json = std::fs::read_to_string(dir.path().join("run.json")).unwrap();
    assert!(run_json.contains("first_rising_task"));
    assert!(dir.path().join("convergence.json").exists());
    assert!(dir.path().join("history.csv").exists());
    assert!(dir.path().join("analysis.json").exists());
}

#[test]
fn analysis_only_mode_emits_only_the_decomposition() {
    let cfg = load("printer_analysis.json");
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&cfg, dir.path(), None, true).unwrap();
    assert_eq!(outcome.exit_code, EXIT_OK);
    assert!(dir.path().join("analysis.json").exists());
    assert!(!dir.path().join("convergence.json").exists());
    assert!(!dir.path().join("history.csv").exists());
}

#[test]
fn seed_override_changes_noise_realizations() {
    let cfg = load("printer_analysis.json");
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_experiment(&cfg, dir_a.path(), Some(1), true).unwrap();
    run_experiment(&cfg, dir_b.path(), Some(2), true).unwrap();
    let a = std::fs::read_to_string(dir_a.path().join("analysis.json")).unwrap();
    let b = std::fs::read_to_string(dir_b.path().join("analysis.json")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn binary_check_verb_and_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ilcbench");
    let out = tempfile::tempdir().unwrap();

    // Certification of the canonical design passes.
    let status = Command::new(bin)
        .args([
            "check",
            "--config",
            repo_config("printer.json").to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "--quiet",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.path().join("printer/convergence.json").exists());

    // The rigid design without robustness fails certification: exit 4.
    let status = Command::new(bin)
        .args([
            "check",
            "--config",
            repo_config("printer_divergent.json").to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "--quiet",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));

    // Config errors exit with 2.
    let bad = out.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let status = Command::new(bin)
        .args([
            "run",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "--quiet",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn binary_profile_verb_writes_trajectory() {
    let bin = env!("CARGO_BIN_EXE_ilcbench");
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args([
            "profile",
            "--config",
            repo_config("printer.json").to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "--quiet",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(out.path().join("printer/profile.csv")).unwrap();
    assert!(csv.starts_with("t_s,pos_m,vel_mps,acc_mps2,jerk_mps3,snap_mps4"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn env_var_sets_default_output_root() {
    let bin = env!("CARGO_BIN_EXE_ilcbench");
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args([
            "profile",
            "--config",
            repo_config("printer.json").to_str().unwrap(),
            "--quiet",
        ])
        .env("ILCBENCH_OUT", out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.path().join("printer/profile.csv").exists());
}
