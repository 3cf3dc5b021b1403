//! Contraction certification of the learning iteration against
//! nonparametric frequency response functions.
//!
//! The iteration e_{j+1} = Q (1 - GS L) e_j + (1 - Q) S r contracts in
//! the 2-norm exactly when |Q (1 - GS L)| stays below one at every
//! frequency; for multivariable loops the largest singular value of
//! Q (I - GS L) takes that role. The test needs no parametric model of
//! the true system: measured response samples suffice, which is what
//! makes it cheap to certify on hardware and across machines.

use crate::error::{CoreError, CoreResult};
use crate::filter::NoncausalFilter;
use crate::frf::{FrequencyMask, Frf};
use crate::mimo::FilterMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// Certification outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// The per-frequency contraction factor and its supremum over the masked
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Masked grid frequencies, rad/s.
    pub frequencies: Vec<f64>,
    /// |Q (1 - GS L)| per masked frequency (largest singular value in
    /// the multivariable case).
    pub rho: Vec<f64>,
    /// Supremum of `rho` over the mask.
    pub sup_rho: f64,
    /// The mask that selected the grid points.
    pub mask: FrequencyMask,
    /// Pass exactly when `sup_rho < 1`.
    pub verdict: Verdict,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Frequency at which `rho` peaks.
    pub fn worst_frequency(&self) -> f64 {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &r) in self.rho.iter().enumerate() {
            if r > best.1 {
                best = (i, r);
            }
        }
        self.frequencies[best.0]
    }

    fn from_samples(
        frequencies: Vec<f64>,
        rho: Vec<f64>,
        mask: FrequencyMask,
    ) -> CoreResult<Self> {
        if frequencies.is_empty() {
            return Err(CoreError::EmptyMask);
        }
        let sup_rho = rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let verdict = if sup_rho < 1.0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Ok(Self {
            frequencies,
            rho,
            sup_rho,
            mask,
            verdict,
        })
    }
}

/// Scalar contraction test: rho(omega) = |Q| |1 - GS L| on the masked
/// grid, verdict pass exactly when the supremum stays below one.
pub fn check_convergence(
    frf_gs: &Frf,
    learning: &NoncausalFilter,
    robustness: &NoncausalFilter,
    mask: &FrequencyMask,
) -> CoreResult<ConvergenceReport> {
    if !frf_gs.is_scalar() {
        return Err(CoreError::DimensionMismatch(
            "scalar test needs a scalar response; use the multivariable test".into(),
        ));
    }
    crate::signal::check_same_sample_time(frf_gs.sample_time(), learning.sample_time())?;
    crate::signal::check_same_sample_time(frf_gs.sample_time(), robustness.sample_time())?;
    let grid = frf_gs.frequencies();
    let selected = mask.select(grid);
    if selected.is_empty() {
        return Err(CoreError::EmptyMask);
    }
    let mut frequencies = Vec::with_capacity(selected.len());
    let mut rho = Vec::with_capacity(selected.len());
    for &i in &selected {
        let w = grid[i];
        let gs = frf_gs.value(i)[(0, 0)];
        let phi = Complex64::new(1.0, 0.0) - gs * learning.eval_omega(w);
        frequencies.push(w);
        rho.push((robustness.eval_omega(w) * phi).norm());
    }
    ConvergenceReport::from_samples(frequencies, rho, mask.clone())
}

/// Multivariable contraction test: rho(omega) is the largest singular
/// value of Q (I - GS L) per masked frequency.
pub fn check_convergence_mimo(
    frf_gs: &Frf,
    learning: &FilterMatrix,
    robustness: &FilterMatrix,
    mask: &FrequencyMask,
) -> CoreResult<ConvergenceReport> {
    let (rows, cols) = frf_gs.shape();
    if rows != cols {
        return Err(CoreError::DimensionMismatch(
            "multivariable test needs a square response".into(),
        ));
    }
    if learning.rows() != rows
        || learning.cols() != rows
        || robustness.rows() != rows
        || robustness.cols() != rows
    {
        return Err(CoreError::DimensionMismatch(format!(
            "filter matrices must be {rows} x {rows}"
        )));
    }
    crate::signal::check_same_sample_time(frf_gs.sample_time(), learning.sample_time())?;
    crate::signal::check_same_sample_time(frf_gs.sample_time(), robustness.sample_time())?;
    let grid = frf_gs.frequencies();
    let selected = mask.select(grid);
    if selected.is_empty() {
        return Err(CoreError::EmptyMask);
    }
    let frequencies: Vec<f64> = selected.iter().map(|&i| grid[i]).collect();
    let rho = mimo_rho(frf_gs, learning, robustness, &selected);
    ConvergenceReport::from_samples(frequencies, rho, mask.clone())
}

fn mimo_rho_at(
    frf_gs: &Frf,
    learning: &FilterMatrix,
    robustness: &FilterMatrix,
    index: usize,
    omega: f64,
) -> f64 {
    let n = frf_gs.shape().0;
    let gs = frf_gs.value(index);
    let l = learning.eval_omega(omega);
    let q = robustness.eval_omega(omega);
    let m = q * (DMatrix::<Complex64>::identity(n, n) - gs * l);
    m.singular_values()[0]
}

#[cfg(feature = "parallel")]
fn mimo_rho(
    frf_gs: &Frf,
    learning: &FilterMatrix,
    robustness: &FilterMatrix,
    selected: &[usize],
) -> Vec<f64> {
    use rayon::prelude::*;
    selected
        .par_iter()
        .map(|&i| mimo_rho_at(frf_gs, learning, robustness, i, frf_gs.frequencies()[i]))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn mimo_rho(
    frf_gs: &Frf,
    learning: &FilterMatrix,
    robustness: &FilterMatrix,
    selected: &[usize],
) -> Vec<f64> {
    mimo_rho_seq(frf_gs, learning, robustness, selected)
}

/// Sequential fallback for the per-frequency singular-value sweep.
pub fn mimo_rho_seq(
    frf_gs: &Frf,
    learning: &FilterMatrix,
    robustness: &FilterMatrix,
    selected: &[usize],
) -> Vec<f64> {
    selected
        .iter()
        .map(|&i| mimo_rho_at(frf_gs, learning, robustness, i, frf_gs.frequencies()[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frf::log_grid;
    use approx::assert_abs_diff_eq;

    const TS: f64 = 1e-3;

    fn grid() -> Vec<f64> {
        log_grid(2.0 * std::f64::consts::PI, std::f64::consts::PI / TS, 120)
    }

    fn flat_frf(value: Complex64) -> Frf {
        let g = grid();
        Frf::scalar(g.clone(), vec![value; g.len()], TS).unwrap()
    }

    #[test]
    fn zero_learning_filter_sits_on_the_boundary() {
        // L = 0 represented by a vanishing-gain filter: rho = |1| = 1,
        // which the strict test fails.
        let frf = flat_frf(Complex64::new(0.7, 0.1));
        let l = NoncausalFilter::new(vec![1e-300], 0, TS).unwrap();
        let q = NoncausalFilter::identity(TS);
        let report = check_convergence(&frf, &l, &q, &FrequencyMask::all()).unwrap();
        assert!((report.sup_rho - 1.0).abs() < 1e-12);
        assert!(!report.passed());
    }

    #[test]
    fn zero_robustness_filter_passes_trivially() {
        let frf = flat_frf(Complex64::new(0.7, 0.1));
        let l = NoncausalFilter::identity(TS);
        let q = NoncausalFilter::new(vec![1e-300], 0, TS).unwrap();
        let report = check_convergence(&frf, &l, &q, &FrequencyMask::all()).unwrap();
        assert!(report.sup_rho < 1e-250);
        assert!(report.passed());
    }

    #[test]
    fn empty_mask_is_rejected() {
        let frf = flat_frf(Complex64::new(0.5, 0.0));
        let l = NoncausalFilter::identity(TS);
        let q = NoncausalFilter::identity(TS);
        let mask = FrequencyMask::band(1e6, 2e6).unwrap();
        assert!(matches!(
            check_convergence(&frf, &l, &q, &mask),
            Err(CoreError::EmptyMask)
        ));
    }

    #[test]
    fn diagonal_inverse_learning_drives_rho_to_zero() {
        // GS diagonal with constant gains, L its exact inverse, Q = I.
        let g = grid();
        let values: Vec<nalgebra::DMatrix<Complex64>> = g
            .iter()
            .map(|_| {
                nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                    Complex64::new(2.0, 0.0),
                    Complex64::new(-0.5, 0.0),
                ]))
            })
            .collect();
        let frf = Frf::matrix(g.clone(), values, TS).unwrap();
        let l = FilterMatrix::diagonal(vec![
            NoncausalFilter::gain(0.5, TS).unwrap(),
            NoncausalFilter::gain(-2.0, TS).unwrap(),
        ])
        .unwrap();
        let q = FilterMatrix::identity(2, TS).unwrap();
        let report = check_convergence_mimo(&frf, &l, &q, &FrequencyMask::all()).unwrap();
        assert!(report.sup_rho < 1e-12);
        assert!(report.passed());
    }

    #[test]
    fn scalar_case_reduces_to_scalar_test() {
        let sc = crate::plant::default_printer_scenario();
        let g = grid();
        let frf = sc.process_sensitivity().freq_response(&g).unwrap();
        let l = NoncausalFilter::new(vec![0.3, -0.2, 40.0, -0.1], 2, TS).unwrap();
        let q = NoncausalFilter::new(vec![0.25, 0.5, 0.25], 1, TS).unwrap();
        let scalar = check_convergence(&frf, &l, &q, &FrequencyMask::all()).unwrap();
        let lm = FilterMatrix::diagonal(vec![l]).unwrap();
        let qm = FilterMatrix::diagonal(vec![q]).unwrap();
        let mimo = check_convergence_mimo(&frf, &lm, &qm, &FrequencyMask::all()).unwrap();
        assert_eq!(scalar.frequencies, mimo.frequencies);
        for (a, b) in scalar.rho.iter().zip(&mimo.rho) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(scalar.sup_rho, mimo.sup_rho, epsilon = 1e-10);
    }

    #[test]
    fn mask_restricts_the_tested_band() {
        // A violation above 100 rad/s disappears when the mask stops at
        // 100 rad/s.
        let g = grid();
        let values: Vec<Complex64> = g
            .iter()
            .map(|&w| {
                if w < 100.0 {
                    Complex64::new(0.8, 0.0)
                } else {
                    Complex64::new(-1.5, 0.0)
                }
            })
            .collect();
        let frf = Frf::scalar(g.clone(), values, TS).unwrap();
        let l = NoncausalFilter::identity(TS);
        let q = NoncausalFilter::identity(TS);
        let full = check_convergence(&frf, &l, &q, &FrequencyMask::all()).unwrap();
        assert!(!full.passed());
        assert!(full.worst_frequency() >= 100.0);
        let band = FrequencyMask::band(0.0, 100.0).unwrap();
        let masked = check_convergence(&frf, &l, &q, &band).unwrap();
        assert!(masked.passed());
    }
}
