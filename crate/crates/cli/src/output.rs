//! Deterministic artifact writers. Floats are printed with Rust's
//! shortest round-trip formatting, so identical runs produce
//! byte-identical files.

use crate::experiment::RunSummary;
use ilcbench_core::basis::BasisHistory;
use ilcbench_core::convergence::ConvergenceReport;
use ilcbench_core::learning::TrialHistory;
use ilcbench_core::repro::PerformanceReport;
use ilcbench_core::signal::Signal;
use ilcbench_core::trajectory::MotionProfile;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

fn write_pretty_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
}

pub fn write_run_json(path: &Path, summary: &RunSummary) -> std::io::Result<()> {
    write_pretty_json(path, summary)
}

pub fn write_analysis_json(path: &Path, report: &PerformanceReport) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct AnalysisJson<'a> {
        mean_norm_2: f64,
        task_norms_2: &'a [f64],
        residual_norms_2: &'a [f64],
        residual_rms_2: f64,
        improvement_factor: Option<f64>,
        improvement_unbounded: bool,
    }
    write_pretty_json(
        path,
        &AnalysisJson {
            mean_norm_2: report.mean_norm,
            task_norms_2: &report.task_norms,
            residual_norms_2: &report.residual_norms,
            residual_rms_2: report.residual_rms,
            improvement_factor: report.improvement_factor,
            improvement_unbounded: report.improvement_factor.is_none(),
        },
    )
}

pub fn write_convergence_json(path: &Path, report: &ConvergenceReport) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct ConvergenceJson<'a> {
        grid_rad_s: &'a [f64],
        rho: &'a [f64],
        sup_rho: f64,
        verdict: &'a str,
    }
    write_pretty_json(
        path,
        &ConvergenceJson {
            grid_rad_s: &report.frequencies,
            rho: &report.rho,
            sup_rho: report.sup_rho,
            verdict: if report.passed() { "pass" } else { "fail" },
        },
    )
}

pub fn write_history_csv(path: &Path, history: &TrialHistory) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "task,e_norm_2,f_norm_2")?;
    for (task, record) in history.tasks.iter().enumerate() {
        writeln!(f, "{task},{},{}", record.error_norm, record.feedforward_norm)?;
    }
    Ok(())
}

pub fn write_basis_history_csv(path: &Path, history: &BasisHistory) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "task,e_norm_2,f_norm_2")?;
    for (task, norm) in history.error_norms.iter().enumerate() {
        // The commanded feedforward norm is reconstructible from theta;
        // the column keeps the same layout as the signal-domain history.
        writeln!(f, "{task},{norm},")?;
    }
    Ok(())
}

pub fn write_theta_history_csv(path: &Path, history: &BasisHistory) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    let dim = history.params.first().map(|p| p.dim()).unwrap_or(0);
    let mut header = String::from("task");
    for i in 0..dim {
        header.push_str(&format!(",theta_{i}"));
    }
    writeln!(f, "{header}")?;
    for (task, params) in history.params.iter().enumerate() {
        let mut line = format!("{task}");
        for v in params.values() {
            line.push_str(&format!(",{v}"));
        }
        writeln!(f, "{line}")?;
    }
    Ok(())
}

pub fn write_signal_csvs(
    dir: &Path,
    reference: &Signal,
    history: &TrialHistory,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let ts = reference.sample_time();
    for (task, record) in history.tasks.iter().enumerate() {
        let mut f = std::fs::File::create(dir.join(format!("{task}.csv")))?;
        writeln!(f, "t_s,r_m,e_m,f")?;
        for k in 0..reference.len() {
            writeln!(
                f,
                "{},{},{},{}",
                k as f64 * ts,
                reference.samples()[k],
                record.error.samples()[k],
                record.feedforward.samples()[k]
            )?;
        }
    }
    Ok(())
}

pub fn write_filter_csv(
    path: &Path,
    filter: &ilcbench_core::filter::NoncausalFilter,
) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "lag,tap")?;
    let preview = filter.preview() as i64;
    for (k, tap) in filter.taps().iter().enumerate() {
        writeln!(f, "{},{}", k as i64 - preview, tap)?;
    }
    Ok(())
}

pub fn write_profile_csv(path: &Path, profile: &MotionProfile) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "t_s,pos_m,vel_mps,acc_mps2,jerk_mps3,snap_mps4")?;
    let ts = profile.sample_time();
    for k in 0..profile.len() {
        let snap = profile.snap().map(|s| s.samples()[k]).unwrap_or(0.0);
        writeln!(
            f,
            "{},{},{},{},{},{}",
            k as f64 * ts,
            profile.position().samples()[k],
            profile.velocity().samples()[k],
            profile.acceleration().samples()[k],
            profile.jerk().samples()[k],
            snap
        )?;
    }
    Ok(())
}
