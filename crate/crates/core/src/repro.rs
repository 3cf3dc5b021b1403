//! Repeated-task error decomposition and the achievable-performance
//! estimate it provides.
//!
//! Learning feedforward can cancel only the part of the error that
//! repeats from task to task. Splitting recorded errors into their sample
//! mean and the per-task residuals therefore predicts, before any
//! learning runs, how far the error can be driven down.

use crate::error::{CoreError, CoreResult};
use crate::signal::Signal;
use serde::Serialize;

/// A batch of error records from identically repeated tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEnsemble {
    errors: Vec<Signal>,
}

impl ErrorEnsemble {
    pub fn new(errors: Vec<Signal>) -> CoreResult<Self> {
        if errors.len() < 2 {
            return Err(CoreError::InvalidParameter(
                "ensemble needs at least two tasks".into(),
            ));
        }
        for e in &errors[1..] {
            errors[0].check_compatible(e)?;
        }
        Ok(Self { errors })
    }

    pub fn n_tasks(&self) -> usize {
        self.errors.len()
    }

    pub fn len(&self) -> usize {
        self.errors[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn errors(&self) -> &[Signal] {
        &self.errors
    }
}

/// Per-sample mean across the ensemble: the reproducible part of the
/// error.
pub fn sample_mean(ensemble: &ErrorEnsemble) -> Signal {
    let n = ensemble.len();
    let scale = 1.0 / ensemble.n_tasks() as f64;
    let mut mean = vec![0.0; n];
    for e in ensemble.errors() {
        for (m, s) in mean.iter_mut().zip(e.samples()) {
            *m += s * scale;
        }
    }
    Signal::new(mean, ensemble.errors()[0].sample_time()).expect("mean of valid signals is valid")
}

/// Splits the ensemble into the reproducible part (the sample mean) and
/// the per-task residuals, which sum to zero elementwise.
pub fn decompose(ensemble: &ErrorEnsemble) -> (Signal, Vec<Signal>) {
    let mean = sample_mean(ensemble);
    let residuals = ensemble
        .errors()
        .iter()
        .map(|e| e.try_sub(&mean).expect("ensemble invariants hold"))
        .collect();
    (mean, residuals)
}

/// The performance lower-bound report: norms of the reproducible part,
/// the raw tasks, and the residuals his learning cannot cancel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    /// 2-norm of the sample mean (the compensable part).
    pub mean_norm: f64,
    /// 2-norm of each recorded task error.
    pub task_norms: Vec<f64>,
    /// 2-norm of each residual after subtracting the mean.
    pub residual_norms: Vec<f64>,
    /// Root-mean-square of the residual norms: the predicted error floor.
    pub residual_rms: f64,
    /// Predicted improvement factor: mean norm over residual RMS. `None`
    /// when the residuals vanish entirely (unbounded improvement); the
    /// serialized form never contains a non-finite number.
    pub improvement_factor: Option<f64>,
}

/// Estimates the achievable improvement from learning feedforward on this
/// ensemble: the reproducible-part norm relative to the residual floor.
pub fn performance_bound(ensemble: &ErrorEnsemble) -> PerformanceReport {
    let (mean, residuals) = decompose(ensemble);
    let mean_norm = mean.norm2();
    let task_norms: Vec<f64> = ensemble.errors().iter().map(Signal::norm2).collect();
    let residual_norms: Vec<f64> = residuals.iter().map(Signal::norm2).collect();
    let residual_rms = (residual_norms.iter().map(|r| r * r).sum::<f64>()
        / residual_norms.len() as f64)
        .sqrt();
    let improvement_factor = if residual_rms == 0.0 {
        None
    } else {
        Some(mean_norm / residual_rms)
    };
    PerformanceReport {
        mean_norm,
        task_norms,
        residual_norms,
        residual_rms,
        improvement_factor,
    }
}
