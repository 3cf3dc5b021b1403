//! Two-sided finite impulse response filters with preview.
//!
//! Learning and robustness filters act on complete task records, so taps
//! at negative lags (preview into the "future" of the record) are legal
//! and essential: the update must move information to earlier time
//! instants.

use crate::error::{CoreError, CoreResult};
use crate::frf::Frf;
use crate::signal::{check_same_sample_time, check_sample_time, Signal};
use num_complex::Complex64;

/// A finite two-sided impulse response. Tap `k` acts at lag
/// `k - preview`, so the filter spans lags `-preview ..= taps.len() - 1 - preview`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoncausalFilter {
    taps: Vec<f64>,
    preview: usize,
    sample_time: f64,
}

impl NoncausalFilter {
    pub fn new(taps: Vec<f64>, preview: usize, sample_time: f64) -> CoreResult<Self> {
        check_sample_time(sample_time)?;
        if taps.is_empty() || taps.iter().all(|&t| t == 0.0) {
            return Err(CoreError::InvalidParameter(
                "filter needs at least one nonzero tap".into(),
            ));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(CoreError::InvalidParameter("non-finite tap".into()));
        }
        if preview >= taps.len() {
            return Err(CoreError::InvalidParameter(format!(
                "preview {preview} exceeds tap span {}",
                taps.len()
            )));
        }
        Ok(Self {
            taps,
            preview,
            sample_time,
        })
    }

    /// The identity filter (single unit tap at lag zero).
    pub fn identity(sample_time: f64) -> Self {
        Self {
            taps: vec![1.0],
            preview: 0,
            sample_time,
        }
    }

    /// Pure preview shift z^{+d}: the output at time t equals the input
    /// at time t + d.
    pub fn preview_shift(d: usize, sample_time: f64) -> Self {
        let mut taps = vec![0.0; d + 1];
        taps[0] = 1.0;
        Self {
            taps,
            preview: d,
            sample_time,
        }
    }

    /// Static gain.
    pub fn gain(k: f64, sample_time: f64) -> CoreResult<Self> {
        Self::new(vec![k], 0, sample_time)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Number of preview (future) taps.
    pub fn preview(&self) -> usize {
        self.preview
    }

    /// Number of past taps.
    pub fn past(&self) -> usize {
        self.taps.len() - 1 - self.preview
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    /// Tap value at a signed lag, zero outside the span.
    pub fn tap_at_lag(&self, lag: i64) -> f64 {
        let idx = lag + self.preview as i64;
        if idx < 0 || idx >= self.taps.len() as i64 {
            0.0
        } else {
            self.taps[idx as usize]
        }
    }

    /// Two-sided convolution over a record. Samples whose window extends
    /// beyond the record use zero extension, and the output has the same
    /// length as the input.
    pub fn apply(&self, input: &Signal) -> CoreResult<Signal> {
        check_same_sample_time(self.sample_time, input.sample_time())?;
        Signal::new(self.apply_slice(input.samples()), self.sample_time)
    }

    /// Convolution on a raw slice with zero extension.
    pub fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() as i64;
        let p = self.preview as i64;
        (0..n)
            .map(|t| {
                let mut acc = 0.0;
                for (k, &c) in self.taps.iter().enumerate() {
                    let lag = k as i64 - p;
                    let src = t - lag;
                    if src >= 0 && src < n {
                        acc += c * x[src as usize];
                    }
                }
                acc
            })
            .collect()
    }

    /// Frequency response at one frequency (rad/s).
    pub fn eval_omega(&self, omega: f64) -> Complex64 {
        let p = self.preview as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in self.taps.iter().enumerate() {
            let lag = (k as i64 - p) as f64;
            acc += Complex64::from_polar(c, -omega * self.sample_time * lag);
        }
        acc
    }

    /// Frequency response on a grid within (0, pi/Ts].
    pub fn freq_response(&self, grid: &[f64]) -> CoreResult<Frf> {
        let nyquist = std::f64::consts::PI / self.sample_time;
        for &w in grid {
            if !(w > 0.0 && w <= nyquist * (1.0 + 1e-12)) {
                return Err(CoreError::FrequencyOutOfRange { omega: w, nyquist });
            }
        }
        let values = grid.iter().map(|&w| self.eval_omega(w)).collect();
        Frf::scalar(grid.to_vec(), values, self.sample_time)
    }

    /// The adjoint filter: taps reversed in time.
    pub fn adjoint(&self) -> Self {
        let mut taps: Vec<f64> = self.taps.clone();
        taps.reverse();
        Self {
            taps,
            preview: self.past(),
            sample_time: self.sample_time,
        }
    }

    /// Series composition (tap convolution).
    pub fn compose(&self, other: &Self) -> CoreResult<Self> {
        check_same_sample_time(self.sample_time, other.sample_time)?;
        let mut taps = vec![0.0; self.taps.len() + other.taps.len() - 1];
        for (i, &a) in self.taps.iter().enumerate() {
            for (j, &b) in other.taps.iter().enumerate() {
                taps[i + j] += a * b;
            }
        }
        Self::new(taps, self.preview + other.preview, self.sample_time)
    }

    /// Tap-wise sum, aligning lags.
    pub fn add(&self, other: &Self) -> CoreResult<Self> {
        check_same_sample_time(self.sample_time, other.sample_time)?;
        let preview = self.preview.max(other.preview);
        let past = self.past().max(other.past());
        let mut taps = vec![0.0; preview + past + 1];
        for (k, tap) in taps.iter_mut().enumerate() {
            let lag = k as i64 - preview as i64;
            *tap = self.tap_at_lag(lag) + other.tap_at_lag(lag);
        }
        Self::new(taps, preview, self.sample_time)
    }

    /// Filter scaled by a constant.
    pub fn scaled(&self, k: f64) -> CoreResult<Self> {
        Self::new(
            self.taps.iter().map(|t| t * k).collect(),
            self.preview,
            self.sample_time,
        )
    }

    /// Drops leading/trailing taps whose relative magnitude is below
    /// `tol` times the largest tap.
    pub fn trimmed(&self, tol: f64) -> Self {
        let peak = self.taps.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        let keep = |t: &f64| t.abs() > tol * peak;
        let first = self.taps.iter().position(keep).unwrap_or(0);
        let last = self.taps.len() - 1 - self.taps.iter().rev().position(keep).unwrap_or(0);
        // Never trim past the lag-zero tap; preview must stay in range.
        let first = first.min(self.preview);
        let last = last.max(self.preview);
        Self {
            taps: self.taps[first..=last].to_vec(),
            preview: self.preview - first,
            sample_time: self.sample_time,
        }
    }
}
