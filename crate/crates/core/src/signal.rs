//! Finite, uniformly sampled real-valued signals.

use crate::error::{CoreError, CoreResult};
use serde::{Deserialize, Serialize};

/// A finite uniformly sampled real-valued sequence with its sample time.
///
/// Signals carry references, errors, feedforward commands, and
/// disturbances. All samples are finite and the sample time is positive;
/// any operation combining two signals requires identical sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<f64>,
    sample_time: f64,
}

impl Signal {
    /// Wraps a sample vector, validating finiteness and the sample time.
    pub fn new(samples: Vec<f64>, sample_time: f64) -> CoreResult<Self> {
        if samples.is_empty() {
            return Err(CoreError::InvalidParameter(
                "signal must contain at least one sample".into(),
            ));
        }
        if let Some(bad) = samples.iter().position(|s| !s.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "non-finite sample at index {bad}"
            )));
        }
        check_sample_time(sample_time)?;
        Ok(Self {
            samples,
            sample_time,
        })
    }

    /// All-zero signal of length `n`.
    pub fn zeros(n: usize, sample_time: f64) -> CoreResult<Self> {
        Self::new(vec![0.0; n], sample_time)
    }

    /// Unit impulse at sample `at` in a length-`n` record.
    pub fn impulse(n: usize, at: usize, sample_time: f64) -> CoreResult<Self> {
        if at >= n {
            return Err(CoreError::InvalidParameter(format!(
                "impulse index {at} outside record of length {n}"
            )));
        }
        let mut samples = vec![0.0; n];
        samples[at] = 1.0;
        Self::new(samples, sample_time)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least one sample
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Euclidean norm of the sample vector.
    pub fn norm2(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Root-mean-square value.
    pub fn rms(&self) -> f64 {
        self.norm2() / (self.len() as f64).sqrt()
    }

    /// Largest absolute sample value.
    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Elementwise sum; sample times and lengths must match.
    pub fn try_add(&self, other: &Self) -> CoreResult<Self> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(samples, self.sample_time)
    }

    /// Elementwise difference; sample times and lengths must match.
    pub fn try_sub(&self, other: &Self) -> CoreResult<Self> {
        self.check_compatible(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(samples, self.sample_time)
    }

    /// Signal scaled by a constant.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * factor).collect(),
            sample_time: self.sample_time,
        }
    }

    /// Extends the record by replicating the first sample `pre` times and
    /// the last sample `post` times. Position references use this to add
    /// dwell before and settle time after a move.
    pub fn pad_edges(&self, pre: usize, post: usize) -> Self {
        let mut samples = Vec::with_capacity(pre + self.samples.len() + post);
        samples.extend(std::iter::repeat_n(self.samples[0], pre));
        samples.extend_from_slice(&self.samples);
        let last = *self.samples.last().expect("non-empty");
        samples.extend(std::iter::repeat_n(last, post));
        Self {
            samples,
            sample_time: self.sample_time,
        }
    }

    /// Pads with `pre` leading edge samples and enough trailing edge
    /// samples to reach `total` samples overall.
    pub fn pad_to_total(&self, pre: usize, total: usize) -> CoreResult<Self> {
        let needed = pre + self.samples.len();
        if total < needed {
            return Err(CoreError::InvalidParameter(format!(
                "total length {total} shorter than padded move ({needed})"
            )));
        }
        Ok(self.pad_edges(pre, total - needed))
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> CoreResult<()> {
        check_same_sample_time(self.sample_time, other.sample_time)?;
        if self.len() != other.len() {
            return Err(CoreError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_sample_time(ts: f64) -> CoreResult<()> {
    if !(ts.is_finite() && ts > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "sample time must be positive and finite, got {ts}"
        )));
    }
    Ok(())
}

pub(crate) fn check_same_sample_time(left: f64, right: f64) -> CoreResult<()> {
    if left != right {
        return Err(CoreError::SampleTimeMismatch { left, right });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Signal::new(vec![], 1e-3).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN], 1e-3).is_err());
        assert!(Signal::new(vec![1.0], 0.0).is_err());
        assert!(Signal::new(vec![1.0], -1.0).is_err());
    }

    #[test]
    fn arithmetic_checks_compatibility() {
        let a = Signal::new(vec![1.0, 2.0], 1e-3).unwrap();
        let b = Signal::new(vec![3.0, 4.0], 1e-3).unwrap();
        let c = Signal::new(vec![3.0], 1e-3).unwrap();
        let d = Signal::new(vec![3.0, 4.0], 2e-3).unwrap();
        assert_eq!(a.try_add(&b).unwrap().samples(), &[4.0, 6.0]);
        assert!(matches!(
            a.try_add(&c),
            Err(CoreError::LengthMismatch { .. })
        ));
        assert!(matches!(
            a.try_add(&d),
            Err(CoreError::SampleTimeMismatch { .. })
        ));
    }

    #[test]
    fn pad_edges_replicates_boundary_values() {
        let a = Signal::new(vec![1.0, 2.0, 3.0], 1e-3).unwrap();
        let p = a.pad_edges(2, 1);
        assert_eq!(p.samples(), &[1.0, 1.0, 1.0, 2.0, 3.0, 3.0]);
        let q = a.pad_to_total(1, 6).unwrap();
        assert_eq!(q.samples(), &[1.0, 1.0, 2.0, 3.0, 3.0, 3.0]);
        assert!(a.pad_to_total(4, 6).is_err());
    }

    #[test]
    fn norms() {
        let a = Signal::new(vec![3.0, 4.0], 1e-3).unwrap();
        assert!((a.norm2() - 5.0).abs() < 1e-12);
        assert!((a.rms() - 5.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(a.max_abs(), 4.0);
    }
}
