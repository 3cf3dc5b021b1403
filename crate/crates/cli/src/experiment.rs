//! Experiment execution: runs the configured scenario and writes the
//! machine-readable artifacts.

use crate::config::{ConfigError, ExperimentConfig, RobustnessConfig};
use crate::output;
use ilcbench_core::basis::{run_basis_ilc, ReferenceData};
use ilcbench_core::convergence::{check_convergence, ConvergenceReport};
use ilcbench_core::designs;
use ilcbench_core::filter::NoncausalFilter;
use ilcbench_core::frf::default_grid;
use ilcbench_core::learning::run_ilc;
use ilcbench_core::lifted::LiftedOperator;
use ilcbench_core::repro::{performance_bound, ErrorEnsemble, PerformanceReport};
use ilcbench_core::signal::Signal;
use serde::Serialize;
use std::path::Path;

/// Stable process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_CERTIFICATION: u8 = 4;

/// Everything a finished experiment reports back.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub exit_code: u8,
    pub summary: RunSummary,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub mode: String,
    pub n_tasks: usize,
    pub diverged_at_task: Option<usize>,
    pub first_rising_task: Option<usize>,
    pub final_error_norm_2: Option<f64>,
    pub certification: Option<CertSummary>,
    pub exit_code: u8,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertSummary {
    pub sup_rho: f64,
    pub verdict: String,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(std::io::Error),
    Core(ilcbench_core::CoreError),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<ilcbench_core::CoreError> for RunError {
    fn from(e: ilcbench_core::CoreError) -> Self {
        RunError::Core(e)
    }
}

fn feedback_ensemble_report(
    cfg: &ExperimentConfig,
    scenario: &ilcbench_core::plant::Scenario,
    record: &Signal,
) -> Result<PerformanceReport, RunError> {
    let zero = Signal::zeros(record.len(), record.sample_time())?;
    let tasks = scenario.run_ensemble(record, &zero, cfg.ensemble.n_tasks)?;
    let ensemble = ErrorEnsemble::new(tasks.into_iter().map(|t| t.error).collect())?;
    Ok(performance_bound(&ensemble))
}

fn certification(
    cfg: &ExperimentConfig,
    scenario: &ilcbench_core::plant::Scenario,
    learning: &NoncausalFilter,
    robustness: &NoncausalFilter,
) -> Result<ConvergenceReport, RunError> {
    let grid = default_grid(scenario.sample_time());
    let frf = designs::measured_process_sensitivity(scenario, &grid)?;
    Ok(check_convergence(&frf, learning, robustness, &cfg.build_mask())?)
}

fn build_robustness(
    cfg: &ExperimentConfig,
    scenario: &ilcbench_core::plant::Scenario,
    learning: &NoncausalFilter,
    choice: &RobustnessConfig,
) -> Result<NoncausalFilter, RunError> {
    match choice {
        RobustnessConfig::Unity => Ok(NoncausalFilter::identity(scenario.sample_time())),
        RobustnessConfig::Designed => {
            let grid = default_grid(scenario.sample_time());
            let design = designs::printer_robustness_filter(
                scenario,
                learning,
                &grid,
                &cfg.build_mask(),
            )?;
            Ok(design.filter)
        }
    }
}

/// Runs the full experiment described by `cfg`, writing artifacts under
/// `out_dir`. Deterministic given the config: all randomness flows from
/// the scenario seed (or its override).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<ExperimentOutcome, RunError> {
    std::fs::create_dir_all(out_dir)?;
    let mut scenario = cfg.build_scenario()?;
    if let Some(seed) = seed_override {
        scenario = scenario.with_seed(seed);
    }
    let (_, record) = cfg.build_reference()?;

    let analysis = feedback_ensemble_report(cfg, &scenario, &record)?;
    output::write_analysis_json(&out_dir.join("analysis.json"), &analysis)?;

    if cfg.analysis_only {
        let summary = RunSummary {
            mode: "analysis".into(),
            n_tasks: cfg.ensemble.n_tasks,
            diverged_at_task: None,
            first_rising_task: None,
            final_error_norm_2: None,
            certification: None,
            exit_code: EXIT_OK,
        };
        output::write_run_json(&out_dir.join("run.json"), &summary)?;
        if !quiet {
            println!("analysis written to {}", out_dir.display());
        }
        return Ok(ExperimentOutcome {
            exit_code: EXIT_OK,
            summary,
        });
    }

    let ilc = cfg.ilc.as_ref().expect("validated: ilc present");

    if let Some(basis_cfg) = &ilc.basis {
        // Basis-function learning branch.
        let spec = ExperimentConfig::build_basis_spec(ilc)?.expect("basis present");
        let model_j =
            LiftedOperator::from_transfer_function(scenario.process_sensitivity(), record.len())?;
        let reference = ReferenceData::Signal(&record);
        let history = run_basis_ilc(
            &scenario,
            &reference,
            &spec,
            &model_j,
            basis_cfg.error_weight,
            basis_cfg.step_weight,
            ilc.n_tasks,
        )?;
        output::write_theta_history_csv(&out_dir.join("theta_history.csv"), &history)?;
        output::write_basis_history_csv(&out_dir.join("history.csv"), &history)?;
        let first_rising = history
            .error_norms
            .windows(2)
            .position(|w| w[1] > w[0])
            .map(|i| i + 1);
        let summary = RunSummary {
            mode: "basis_ilc".into(),
            n_tasks: ilc.n_tasks,
            diverged_at_task: None,
            first_rising_task: first_rising,
            final_error_norm_2: history.error_norms.last().copied(),
            certification: None,
            exit_code: EXIT_OK,
        };
        output::write_run_json(&out_dir.join("run.json"), &summary)?;
        if !quiet {
            println!(
                "basis learning finished; final error norm {:.3e}",
                history.error_norms.last().copied().unwrap_or(f64::NAN)
            );
        }
        return Ok(ExperimentOutcome {
            exit_code: EXIT_OK,
            summary,
        });
    }

    // Signal-domain learning branch.
    let learning = cfg.build_learning_filter(&scenario, ilc)?.filter;
    let robustness = build_robustness(cfg, &scenario, &learning, &ilc.robustness)?;
    let report = certification(cfg, &scenario, &learning, &robustness)?;
    output::write_convergence_json(&out_dir.join("convergence.json"), &report)?;
    output::write_filter_csv(&out_dir.join("learning_filter.csv"), &learning)?;
    output::write_filter_csv(&out_dir.join("robustness_filter.csv"), &robustness)?;

    let history = run_ilc(&scenario, &record, &learning, &robustness, ilc.alpha, ilc.n_tasks)?;
    output::write_history_csv(&out_dir.join("history.csv"), &history)?;
    if cfg.write_signals {
        output::write_signal_csvs(&out_dir.join("signals"), &record, &history)?;
    }

    let diverged = history.diverged_at;
    let cert_failed = !report.passed();
    let exit_code = if diverged.is_some() {
        EXIT_DIVERGED
    } else if cert_failed && cfg.require_pass {
        EXIT_CERTIFICATION
    } else {
        EXIT_OK
    };
    let summary = RunSummary {
        mode: "signal_ilc".into(),
        n_tasks: history.tasks.len(),
        diverged_at_task: diverged,
        first_rising_task: history.first_rising_task(),
        final_error_norm_2: history.tasks.last().map(|t| t.error_norm),
        certification: Some(CertSummary {
            sup_rho: report.sup_rho,
            verdict: if report.passed() { "pass" } else { "fail" }.into(),
        }),
        exit_code,
    };
    output::write_run_json(&out_dir.join("run.json"), &summary)?;
    if !quiet {
        println!(
            "{} tasks, sup_rho {:.4} ({}), final error norm {:.3e}",
            summary.n_tasks,
            report.sup_rho,
            summary
                .certification
                .as_ref()
                .map(|c| c.verdict.as_str())
                .unwrap_or("n/a"),
            summary.final_error_norm_2.unwrap_or(f64::NAN)
        );
        if let Some(task) = diverged {
            println!("run diverged at task {task}");
        }
    }
    Ok(ExperimentOutcome { exit_code, summary })
}

/// `check` verb: certification only.
pub fn run_check(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    quiet: bool,
) -> Result<ExperimentOutcome, RunError> {
    std::fs::create_dir_all(out_dir)?;
    let scenario = cfg.build_scenario()?;
    let ilc = cfg
        .ilc
        .as_ref()
        .ok_or_else(|| config_violation("ilc", "check needs an ilc section"))?;
    let learning = cfg.build_learning_filter(&scenario, ilc)?.filter;
    let robustness = build_robustness(cfg, &scenario, &learning, &ilc.robustness)?;
    let report = certification(cfg, &scenario, &learning, &robustness)?;
    output::write_convergence_json(&out_dir.join("convergence.json"), &report)?;
    let exit_code = if report.passed() {
        EXIT_OK
    } else {
        EXIT_CERTIFICATION
    };
    if !quiet {
        println!(
            "certification {}: sup_rho = {:.4} at {:.1} rad/s",
            if report.passed() { "pass" } else { "fail" },
            report.sup_rho,
            report.worst_frequency()
        );
    }
    let summary = RunSummary {
        mode: "check".into(),
        n_tasks: 0,
        diverged_at_task: None,
        first_rising_task: None,
        final_error_norm_2: None,
        certification: Some(CertSummary {
            sup_rho: report.sup_rho,
            verdict: if report.passed() { "pass" } else { "fail" }.into(),
        }),
        exit_code,
    };
    output::write_run_json(&out_dir.join("run.json"), &summary)?;
    Ok(ExperimentOutcome { exit_code, summary })
}

/// `analyze` verb: feedback-only ensemble decomposition.
pub fn run_analyze(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
    quiet: bool,
) -> Result<ExperimentOutcome, RunError> {
    let mut cfg = cfg.clone();
    cfg.analysis_only = true;
    run_experiment(&cfg, out_dir, seed_override, quiet)
}

/// `profile` verb: reference trajectory export.
pub fn run_profile(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    quiet: bool,
) -> Result<ExperimentOutcome, RunError> {
    std::fs::create_dir_all(out_dir)?;
    let (profile, _) = cfg.build_reference()?;
    output::write_profile_csv(&out_dir.join("profile.csv"), &profile)?;
    if !quiet {
        println!(
            "profile: {} samples over {:.3} s",
            profile.len(),
            profile.duration()
        );
    }
    let summary = RunSummary {
        mode: "profile".into(),
        n_tasks: 0,
        diverged_at_task: None,
        first_rising_task: None,
        final_error_norm_2: None,
        certification: None,
        exit_code: EXIT_OK,
    };
    Ok(ExperimentOutcome {
        exit_code: EXIT_OK,
        summary,
    })
}

fn config_violation(field: &str, message: &str) -> RunError {
    RunError::Config(ConfigError::Invalid(vec![crate::config::Violation {
        field: field.into(),
        message: message.into(),
    }]))
}
