//! Zero-phase robustness filter design.
//!
//! The robustness filter shrinks the learning update at frequencies where
//! the model is too wrong for contraction, at the cost of an asymptotic
//! residual. Phase would hurt performance without helping robustness, so
//! the filter is built as a windowed-sinc low-pass prototype composed
//! with its own adjoint: the result has a real, nonnegative frequency
//! response equal to the squared prototype magnitude.

use crate::error::{CoreError, CoreResult};
use crate::filter::NoncausalFilter;
use crate::frf::{FrequencyMask, Frf};

/// A masked frequency is treated as needing roll-off once
/// |1 - GS L| reaches this level; the gap to one is the safety margin.
pub const ROLLOFF_TRIGGER: f64 = 0.9;

/// A designed robustness filter and what it achieved.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessDesign {
    pub filter: NoncausalFilter,
    /// 1 - sup_masked |Q| |1 - GS L|: positive means contraction holds.
    pub margin: f64,
    /// Prototype cutoff in rad/s; `None` when no roll-off was needed.
    pub cutoff: Option<f64>,
}

/// Squared-magnitude frequency response of the adjoint-composed filter
/// built from `prototype`: evaluates adjoint(prototype) o prototype on
/// the grid. The response is real and nonnegative and equals
/// |prototype(omega)|^2.
pub fn zero_phase_magnitude(prototype: &NoncausalFilter, grid: &[f64]) -> CoreResult<Frf> {
    let composed = prototype.adjoint().compose(prototype)?;
    composed.freq_response(grid)
}

/// Zero-phase low-pass: a windowed-sinc prototype composed with its
/// adjoint. The response is real, nonnegative, at most one, and rolls
/// off around `cutoff` rad/s.
pub fn zero_phase_lowpass(
    cutoff: f64,
    prototype_taps: usize,
    sample_time: f64,
) -> CoreResult<NoncausalFilter> {
    let prototype = windowed_sinc(cutoff, prototype_taps, sample_time)?;
    prototype.adjoint().compose(&prototype)
}

/// Causal linear-phase windowed-sinc low-pass with unit-capped magnitude.
///
/// A Blackman window keeps the squared passband within a few 1e-4 of
/// one; the fixed point the learning settles on scales directly with
/// that passband deviation, so flatness matters more than a narrow
/// transition here.
fn windowed_sinc(cutoff: f64, taps: usize, sample_time: f64) -> CoreResult<NoncausalFilter> {
    let theta = cutoff * sample_time; // rad/sample, in (0, pi)
    let mid = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let k = i as f64 - mid;
            let sinc = if k == 0.0 {
                theta / std::f64::consts::PI
            } else {
                (theta * k).sin() / (std::f64::consts::PI * k)
            };
            let phase = 2.0 * std::f64::consts::PI * i as f64 / (taps - 1) as f64;
            let w = 0.42 - 0.5 * phase.cos() + 0.08 * (2.0 * phase).cos();
            sinc * w
        })
        .collect();
    // Normalize the peak magnitude to one so the squared response never
    // exceeds unity.
    let mut peak = 0.0f64;
    for i in 0..=512 {
        let w = std::f64::consts::PI * i as f64 / 512.0;
        let mut acc_re = 0.0;
        let mut acc_im = 0.0;
        for (k, &c) in h.iter().enumerate() {
            acc_re += c * (w * k as f64).cos();
            acc_im -= c * (w * k as f64).sin();
        }
        peak = peak.max((acc_re * acc_re + acc_im * acc_im).sqrt());
    }
    if peak > 0.0 {
        for c in &mut h {
            *c /= peak;
        }
    }
    NoncausalFilter::new(h, 0, sample_time)
}

/// Designs the zero-phase robustness filter for a learning filter against
/// a measured (or model-derived) feedforward-to-error response.
///
/// Where |1 - GS L| stays below [`ROLLOFF_TRIGGER`] on the whole mask the
/// identity filter is returned. Otherwise a low-pass prototype squared
/// via the adjoint composition is rolled off from the first triggering
/// frequency, widening and lowering the transition until
/// |Q| |1 - GS L| < 1 holds at every masked frequency.
pub fn design_robustness_filter(
    frf_gs: &Frf,
    learning: &NoncausalFilter,
    mask: &FrequencyMask,
) -> CoreResult<RobustnessDesign> {
    if !frf_gs.is_scalar() {
        return Err(CoreError::DimensionMismatch(
            "robustness design expects a scalar response".into(),
        ));
    }
    let grid = frf_gs.frequencies();
    let selected = mask.select(grid);
    if selected.is_empty() {
        return Err(CoreError::EmptyMask);
    }
    let ts = frf_gs.sample_time();
    crate::signal::check_same_sample_time(ts, learning.sample_time())?;

    // phi(omega) = |1 - GS L| on the masked grid.
    let phi: Vec<(f64, f64)> = selected
        .iter()
        .map(|&i| {
            let gs = frf_gs.value(i)[(0, 0)];
            let l = learning.eval_omega(grid[i]);
            (grid[i], (num_complex::Complex64::new(1.0, 0.0) - gs * l).norm())
        })
        .collect();

    let worst = phi
        .iter()
        .cloned()
        .fold((0.0, 0.0), |acc, p| if p.1 > acc.1 { p } else { acc });
    if worst.1 < ROLLOFF_TRIGGER {
        return Ok(RobustnessDesign {
            filter: NoncausalFilter::identity(ts),
            margin: 1.0 - worst.1,
            cutoff: None,
        });
    }

    let trigger = phi
        .iter()
        .find(|p| p.1 >= ROLLOFF_TRIGGER)
        .expect("worst reached the trigger")
        .0;
    let lowest = phi[0].0;

    let mut best_sup = f64::INFINITY;
    let mut best_freq = worst.0;
    for taps in [257usize, 513, 1025, 2049] {
        let mut cutoff = trigger;
        while cutoff > lowest * 1.05 {
            let prototype = windowed_sinc(cutoff, taps, ts)?;
            let q = prototype.adjoint().compose(&prototype)?;
            let mut sup = 0.0f64;
            let mut sup_freq = phi[0].0;
            for &(w, p) in &phi {
                let rho = q.eval_omega(w).norm() * p;
                if rho > sup {
                    sup = rho;
                    sup_freq = w;
                }
            }
            if sup < 1.0 {
                return Ok(RobustnessDesign {
                    filter: q,
                    margin: 1.0 - sup,
                    cutoff: Some(cutoff),
                });
            }
            if sup < best_sup {
                best_sup = sup;
                best_freq = sup_freq;
            }
            cutoff *= 0.75;
        }
    }
    Err(CoreError::RobustnessInfeasible {
        worst_frequency: best_freq,
    })
}
