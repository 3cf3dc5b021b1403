//! Nonparametric frequency response functions and frequency masks.

use crate::error::{CoreError, CoreResult};
use crate::signal::check_sample_time;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A nonparametric frequency response: a strictly increasing grid of
/// frequencies in (0, pi/Ts] rad/s with one complex n_out x n_in matrix
/// per grid point. Scalar responses are 1 x 1 matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Frf {
    frequencies: Vec<f64>,
    values: Vec<DMatrix<Complex64>>,
    sample_time: f64,
}

impl Frf {
    /// Builds a matrix-valued response, validating grid and shapes.
    pub fn matrix(
        frequencies: Vec<f64>,
        values: Vec<DMatrix<Complex64>>,
        sample_time: f64,
    ) -> CoreResult<Self> {
        check_sample_time(sample_time)?;
        if frequencies.is_empty() || frequencies.len() != values.len() {
            return Err(CoreError::InvalidParameter(
                "frequency grid and value list must be equal and nonempty".into(),
            ));
        }
        let nyquist = std::f64::consts::PI / sample_time;
        for pair in frequencies.windows(2) {
            if pair[1] <= pair[0] {
                return Err(CoreError::InvalidParameter(
                    "frequency grid must be strictly increasing".into(),
                ));
            }
        }
        for &w in &frequencies {
            if !(w > 0.0 && w <= nyquist * (1.0 + 1e-12)) {
                return Err(CoreError::FrequencyOutOfRange { omega: w, nyquist });
            }
        }
        let shape = values[0].shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(CoreError::InvalidParameter("empty response matrix".into()));
        }
        for v in &values {
            if v.shape() != shape {
                return Err(CoreError::DimensionMismatch(
                    "response matrix shape varies across the grid".into(),
                ));
            }
            if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(CoreError::InvalidParameter(
                    "non-finite response value".into(),
                ));
            }
        }
        Ok(Self {
            frequencies,
            values,
            sample_time,
        })
    }

    /// Builds a scalar-valued response.
    pub fn scalar(
        frequencies: Vec<f64>,
        values: Vec<Complex64>,
        sample_time: f64,
    ) -> CoreResult<Self> {
        let values = values
            .into_iter()
            .map(|v| DMatrix::from_element(1, 1, v))
            .collect();
        Self::matrix(frequencies, values, sample_time)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: nonempty grid
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// (n_out, n_in) of the per-frequency matrices.
    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape() == (1, 1)
    }

    pub fn value(&self, index: usize) -> &DMatrix<Complex64> {
        &self.values[index]
    }

    /// Scalar value at a grid index; fails on matrix-valued responses.
    pub fn scalar_value(&self, index: usize) -> CoreResult<Complex64> {
        if !self.is_scalar() {
            return Err(CoreError::DimensionMismatch(
                "expected a scalar response".into(),
            ));
        }
        Ok(self.values[index][(0, 0)])
    }

    /// Linear interpolation of a scalar response at `omega`, clamped to
    /// the grid ends. Real and imaginary parts are interpolated
    /// separately, the usual treatment for measured response data.
    pub fn scalar_at(&self, omega: f64) -> CoreResult<Complex64> {
        if !self.is_scalar() {
            return Err(CoreError::DimensionMismatch(
                "expected a scalar response".into(),
            ));
        }
        let f = &self.frequencies;
        if omega <= f[0] {
            return Ok(self.values[0][(0, 0)]);
        }
        if omega >= f[f.len() - 1] {
            return Ok(self.values[f.len() - 1][(0, 0)]);
        }
        let hi = f.partition_point(|&w| w < omega);
        let lo = hi - 1;
        let t = (omega - f[lo]) / (f[hi] - f[lo]);
        let a = self.values[lo][(0, 0)];
        let b = self.values[hi][(0, 0)];
        Ok(a + (b - a).scale(t))
    }

    /// Elementwise product of two scalar responses on the same grid.
    pub fn scalar_product(&self, other: &Frf) -> CoreResult<Frf> {
        if !self.is_scalar() || !other.is_scalar() {
            return Err(CoreError::DimensionMismatch(
                "product requires scalar responses".into(),
            ));
        }
        if self.frequencies != other.frequencies {
            return Err(CoreError::InvalidParameter(
                "responses live on different grids".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a[(0, 0)] * b[(0, 0)])
            .collect();
        Frf::scalar(self.frequencies.clone(), values, self.sample_time)
    }
}

/// A set of frequency bands (rad/s, inclusive) selecting which grid
/// points a certification may use. Measured responses are often unusable
/// in some band; which band is a judgement call left to the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMask {
    bands: Vec<(f64, f64)>,
}

impl FrequencyMask {
    /// Mask that keeps every frequency.
    pub fn all() -> Self {
        Self {
            bands: vec![(0.0, f64::INFINITY)],
        }
    }

    /// Single inclusive band.
    pub fn band(low: f64, high: f64) -> CoreResult<Self> {
        if !(low.is_finite() && low >= 0.0 && high > low) {
            return Err(CoreError::InvalidParameter(format!(
                "invalid mask band [{low}, {high}]"
            )));
        }
        Ok(Self {
            bands: vec![(low, high)],
        })
    }

    /// Union of inclusive bands.
    pub fn bands(bands: Vec<(f64, f64)>) -> CoreResult<Self> {
        if bands.is_empty() {
            return Err(CoreError::EmptyMask);
        }
        for &(low, high) in &bands {
            if !(low.is_finite() && low >= 0.0 && high > low) {
                return Err(CoreError::InvalidParameter(format!(
                    "invalid mask band [{low}, {high}]"
                )));
            }
        }
        Ok(Self { bands })
    }

    pub fn contains(&self, omega: f64) -> bool {
        self.bands.iter().any(|&(lo, hi)| omega >= lo && omega <= hi)
    }

    /// Indices of the grid points the mask keeps.
    pub fn select(&self, grid: &[f64]) -> Vec<usize> {
        grid.iter()
            .enumerate()
            .filter(|(_, &w)| self.contains(w))
            .map(|(i, _)| i)
            .collect()
    }
}

impl Default for FrequencyMask {
    fn default() -> Self {
        Self::all()
    }
}

/// Default analysis grid: 400 logarithmically spaced points from 1 Hz up
/// to the Nyquist frequency.
pub fn default_grid(sample_time: f64) -> Vec<f64> {
    let hi = std::f64::consts::PI / sample_time;
    let lo = (2.0 * std::f64::consts::PI).min(hi / 400.0);
    log_grid(lo, hi, 400)
}

/// `n` logarithmically spaced frequencies over [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_must_increase_and_stay_in_band() {
        let ts = 1e-3;
        let v = vec![Complex64::new(1.0, 0.0); 2];
        assert!(Frf::scalar(vec![10.0, 5.0], v.clone(), ts).is_err());
        assert!(Frf::scalar(vec![10.0, 4000.0], v.clone(), ts).is_err());
        assert!(Frf::scalar(vec![10.0, 20.0], v, ts).is_ok());
    }

    #[test]
    fn interpolation_is_linear_and_clamped() {
        let ts = 1e-3;
        let frf = Frf::scalar(
            vec![10.0, 20.0],
            vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 2.0)],
            ts,
        )
        .unwrap();
        let mid = frf.scalar_at(15.0).unwrap();
        assert!((mid.re - 2.0).abs() < 1e-12 && (mid.im - 1.0).abs() < 1e-12);
        assert_eq!(frf.scalar_at(1.0).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(frf.scalar_at(100.0).unwrap(), Complex64::new(3.0, 2.0));
    }

    #[test]
    fn mask_selects_bands() {
        let mask = FrequencyMask::bands(vec![(1.0, 2.0), (5.0, 6.0)]).unwrap();
        let grid = [0.5, 1.5, 3.0, 5.5, 7.0];
        assert_eq!(mask.select(&grid), vec![1, 3]);
        assert_eq!(FrequencyMask::all().select(&grid).len(), 5);
    }

    #[test]
    fn default_grid_spans_one_hz_to_nyquist() {
        let g = default_grid(1e-3);
        assert_eq!(g.len(), 400);
        assert!((g[0] - 2.0 * std::f64::consts::PI).abs() < 1e-9);
        assert!((g[399] - std::f64::consts::PI / 1e-3).abs() < 1e-6);
        assert!(g.windows(2).all(|p| p[1] > p[0]));
    }
}
