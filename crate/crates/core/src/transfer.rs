//! Discrete-time rational systems in the delay operator.

use crate::error::{CoreError, CoreResult};
use crate::frf::Frf;
use crate::poly;
use crate::signal::{check_same_sample_time, check_sample_time, Signal};
use num_complex::Complex64;

/// Pole magnitudes must stay below `1 - STABILITY_TOL`; anything closer to
/// the unit circle is declared unstable.
pub const STABILITY_TOL: f64 = 1e-9;

/// A discrete-time rational transfer function.
///
/// Numerator and denominator are polynomials in the unit delay z^{-1},
/// coefficients ascending in the delay power. The denominator's leading
/// coefficient is nonzero and normalized to one, so every value of this
/// type is causal; properness is recorded by [`TransferFunction::relative_degree`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    sample_time: f64,
}

impl TransferFunction {
    /// Builds a transfer function, normalizing the denominator so its
    /// leading coefficient is one and trimming trailing zeros.
    pub fn new(num: Vec<f64>, den: Vec<f64>, sample_time: f64) -> CoreResult<Self> {
        check_sample_time(sample_time)?;
        if num.iter().any(|c| !c.is_finite()) || den.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "non-finite polynomial coefficient".into(),
            ));
        }
        let den = poly::trim(den);
        if den.is_empty() || den[0] == 0.0 {
            return Err(CoreError::InvalidParameter(
                "denominator leading coefficient must be nonzero".into(),
            ));
        }
        let lead = den[0];
        let den: Vec<f64> = den.iter().map(|c| c / lead).collect();
        let mut num = poly::trim(num);
        if num.is_empty() {
            num.push(0.0);
        }
        let num: Vec<f64> = num.iter().map(|c| c / lead).collect();
        Ok(Self {
            num,
            den,
            sample_time,
        })
    }

    /// Static gain `k`.
    pub fn gain(k: f64, sample_time: f64) -> CoreResult<Self> {
        Self::new(vec![k], vec![1.0], sample_time)
    }

    /// Pure delay z^{-d}.
    pub fn delay(d: usize, sample_time: f64) -> CoreResult<Self> {
        let mut num = vec![0.0; d + 1];
        num[d] = 1.0;
        Self::new(num, vec![1.0], sample_time)
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    /// Number of leading zero numerator coefficients: the input-output
    /// delay, and the recorded properness measure of the system.
    pub fn relative_degree(&self) -> usize {
        self.num.iter().take_while(|&&c| c == 0.0).count()
    }

    /// True when the response to an input starts at least one sample late.
    pub fn is_strictly_proper(&self) -> bool {
        self.relative_degree() >= 1 && self.num.iter().any(|&c| c != 0.0)
    }

    /// Evaluates the rational function at a point `w = z^{-1}`.
    pub fn eval_delay(&self, w: Complex64) -> Complex64 {
        poly::eval(&self.num, w) / poly::eval(&self.den, w)
    }

    /// Evaluates the frequency response at `omega` rad/s.
    pub fn eval_omega(&self, omega: f64) -> Complex64 {
        let w = Complex64::from_polar(1.0, -omega * self.sample_time);
        self.eval_delay(w)
    }

    /// Poles in the z plane.
    pub fn poles(&self) -> Vec<Complex64> {
        // Roots w of the denominator map to poles z = 1/w; the leading
        // coefficient is nonzero so w = 0 never occurs.
        poly::roots(&self.den).iter().map(|w| w.inv()).collect()
    }

    /// Finite zeros in the z plane (delay factors excluded).
    pub fn zeros(&self) -> Vec<Complex64> {
        let d = self.relative_degree();
        if d >= self.num.len() {
            return Vec::new();
        }
        poly::roots(&self.num[d..]).iter().map(|w| w.inv()).collect()
    }

    /// True when all pole magnitudes are below `1 - STABILITY_TOL`.
    pub fn is_stable(&self) -> bool {
        self.poles()
            .iter()
            .all(|p| p.norm() < 1.0 - STABILITY_TOL)
    }

    /// Series interconnection.
    pub fn series(&self, other: &Self) -> CoreResult<Self> {
        check_same_sample_time(self.sample_time, other.sample_time)?;
        Self::new(
            poly::mul(&self.num, &other.num),
            poly::mul(&self.den, &other.den),
            self.sample_time,
        )
    }

    /// Parallel interconnection (sum of responses).
    pub fn parallel(&self, other: &Self) -> CoreResult<Self> {
        check_same_sample_time(self.sample_time, other.sample_time)?;
        let num = poly::add(
            &poly::mul(&self.num, &other.den),
            &poly::mul(&other.num, &self.den),
        );
        Self::new(num, poly::mul(&self.den, &other.den), self.sample_time)
    }

    /// Transfer function scaled by a constant.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            num: self.num.iter().map(|c| c * k).collect(),
            den: self.den.clone(),
            sample_time: self.sample_time,
        }
    }

    /// First `n` samples of the impulse response.
    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut h = vec![0.0; n];
        for k in 0..n {
            let mut acc = if k < self.num.len() { self.num[k] } else { 0.0 };
            for i in 1..self.den.len().min(k + 1) {
                acc -= self.den[i] * h[k - i];
            }
            h[k] = acc;
        }
        h
    }

    /// Simulates the system on an input record from zero initial
    /// conditions (the system resets between tasks).
    ///
    /// Fails with the first offending index if the recursion produces a
    /// non-finite sample.
    pub fn simulate(&self, input: &Signal) -> CoreResult<Signal> {
        check_same_sample_time(self.sample_time, input.sample_time())?;
        let u = input.samples();
        let n = u.len();
        let mut y = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for (i, &b) in self.num.iter().enumerate() {
                if i > k {
                    break;
                }
                acc += b * u[k - i];
            }
            for i in 1..self.den.len().min(k + 1) {
                acc -= self.den[i] * y[k - i];
            }
            if !acc.is_finite() {
                return Err(CoreError::SimulationOverflow { index: k });
            }
            y[k] = acc;
        }
        Signal::new(y, self.sample_time)
    }

    /// Frequency response on a grid of rad/s values within (0, pi/Ts].
    pub fn freq_response(&self, grid: &[f64]) -> CoreResult<Frf> {
        let nyquist = std::f64::consts::PI / self.sample_time;
        for &w in grid {
            if !(w > 0.0 && w <= nyquist * (1.0 + 1e-12)) {
                return Err(CoreError::FrequencyOutOfRange { omega: w, nyquist });
            }
        }
        let values = eval_grid(self, grid);
        Frf::scalar(grid.to_vec(), values, self.sample_time)
    }
}

#[cfg(feature = "parallel")]
fn eval_grid(sys: &TransferFunction, grid: &[f64]) -> Vec<Complex64> {
    use rayon::prelude::*;
    grid.par_iter().map(|&w| sys.eval_omega(w)).collect()
}

#[cfg(not(feature = "parallel"))]
fn eval_grid(sys: &TransferFunction, grid: &[f64]) -> Vec<Complex64> {
    eval_grid_seq(sys, grid)
}

/// Sequential frequency-response evaluation; the build with the
/// `parallel` feature dispatches grid points across threads instead.
pub fn eval_grid_seq(sys: &TransferFunction, grid: &[f64]) -> Vec<Complex64> {
    grid.iter().map(|&w| sys.eval_omega(w)).collect()
}

/// Closed-loop error and process-sensitivity maps for a plant under
/// feedback.
///
/// Returns `S = 1/(1 + G K)` and `PS = G S` over the common closed-loop
/// denominator, after verifying that every closed-loop pole is strictly
/// inside the unit circle.
pub fn closed_loop_maps(
    plant: &TransferFunction,
    controller: &TransferFunction,
) -> CoreResult<(TransferFunction, TransferFunction)> {
    check_same_sample_time(plant.sample_time, controller.sample_time)?;
    let loop_num = poly::mul(&plant.num, &controller.num);
    let den_cl = poly::add(&poly::mul(&plant.den, &controller.den), &loop_num);
    let den_cl = poly::trim(den_cl);
    if den_cl.iter().all(|&c| c == 0.0) {
        return Err(CoreError::InvalidParameter(
            "1 + G K is identically zero".into(),
        ));
    }
    let s = TransferFunction::new(
        poly::mul(&plant.den, &controller.den),
        den_cl.clone(),
        plant.sample_time,
    )?;
    if !s.is_stable() {
        let magnitudes: Vec<f64> = s
            .poles()
            .iter()
            .map(|p| p.norm())
            .filter(|m| *m >= 1.0 - STABILITY_TOL)
            .collect();
        return Err(CoreError::UnstableClosedLoop { magnitudes });
    }
    let ps = TransferFunction::new(
        poly::mul(&plant.num, &controller.den),
        den_cl,
        plant.sample_time,
    )?;
    Ok((s, ps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const TS: f64 = 1e-3;

    #[test]
    fn delay_impulse_moves_by_d_samples() {
        let sys = TransferFunction::delay(3, TS).unwrap();
        let u = Signal::impulse(8, 0, TS).unwrap();
        let y = sys.simulate(&u).unwrap();
        let mut expected = vec![0.0; 8];
        expected[3] = 1.0;
        assert_eq!(y.samples(), expected.as_slice());
        assert_eq!(sys.relative_degree(), 3);
        assert!(sys.is_strictly_proper());
    }

    #[test]
    fn static_gain_scales_input() {
        let sys = TransferFunction::gain(2.5, TS).unwrap();
        let u = Signal::new(vec![1.0, -2.0, 0.5], TS).unwrap();
        let y = sys.simulate(&u).unwrap();
        assert_eq!(y.samples(), &[2.5, -5.0, 1.25]);
        assert!(!sys.is_strictly_proper());
    }

    #[test]
    fn delay_frequency_response() {
        let sys = TransferFunction::delay(1, TS).unwrap();
        let grid = [10.0, 100.0, 1000.0];
        let frf = sys.freq_response(&grid).unwrap();
        for (i, &w) in grid.iter().enumerate() {
            let v = frf.scalar_value(i).unwrap();
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.arg(), -w * TS, epsilon = 1e-12);
        }
    }

    #[test]
    fn gain_frequency_response_is_constant() {
        let sys = TransferFunction::gain(3.0, TS).unwrap();
        let frf = sys.freq_response(&[1.0, 50.0, 3141.59]).unwrap();
        for i in 0..3 {
            let v = frf.scalar_value(i).unwrap();
            assert_abs_diff_eq!(v.re, 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn freq_response_rejects_out_of_band_grid() {
        let sys = TransferFunction::gain(1.0, TS).unwrap();
        assert!(matches!(
            sys.freq_response(&[0.0]),
            Err(CoreError::FrequencyOutOfRange { .. })
        ));
        assert!(matches!(
            sys.freq_response(&[4000.0]),
            Err(CoreError::FrequencyOutOfRange { .. })
        ));
    }

    #[test]
    fn unstable_recursion_reports_first_bad_index() {
        // Pole at z = 10: output grows by a decade each sample.
        let sys = TransferFunction::new(vec![1.0], vec![1.0, -10.0], TS).unwrap();
        let u = Signal::impulse(400, 0, TS).unwrap();
        match sys.simulate(&u) {
            Err(CoreError::SimulationOverflow { index }) => assert!(index > 250 && index < 400),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn closed_loop_trivial_cases() {
        let g = TransferFunction::new(vec![0.0, 0.5], vec![1.0, -0.2], TS).unwrap();
        let k0 = TransferFunction::gain(0.0, TS).unwrap();
        let (s, ps) = closed_loop_maps(&g, &k0).unwrap();
        let u = Signal::new(vec![1.0, 0.3, -0.7, 0.2], TS).unwrap();
        for (a, b) in s.simulate(&u).unwrap().samples().iter().zip(u.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let direct = g.simulate(&u).unwrap();
        for (a, b) in ps.simulate(&u).unwrap().samples().iter().zip(direct.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }

        let g1 = TransferFunction::gain(1.0, TS).unwrap();
        let (s, _) = closed_loop_maps(&g1, &g1).unwrap();
        assert_eq!(s.numerator(), &[0.5]);
        assert_eq!(s.denominator(), &[1.0]);
    }

    #[test]
    fn unstable_closed_loop_reports_magnitudes() {
        // Positive feedback around a gain of two: pole outside the circle.
        let g = TransferFunction::new(vec![0.0, 2.0], vec![1.0], TS).unwrap();
        let k = TransferFunction::gain(-1.0, TS).unwrap();
        match closed_loop_maps(&g, &k) {
            Err(CoreError::UnstableClosedLoop { magnitudes }) => {
                assert!((magnitudes[0] - 2.0).abs() < 1e-9);
            }
            other => panic!("expected instability, got {other:?}"),
        }
    }

    /// Independent oracle for the rational evaluation: the DFT of a long
    /// simulated impulse response. The open-loop positioning plant is
    /// marginally stable (its impulse response never decays), so the
    /// check runs on the stable closed-loop feedforward-to-error map.
    #[test]
    fn freq_response_matches_impulse_response_dft() {
        let sc = crate::plant::default_printer_scenario();
        let sys = sc.process_sensitivity();
        let m = 6000;
        let h = sys.impulse_response(m);
        let grid = crate::frf::log_grid(2.0 * std::f64::consts::PI, 2500.0, 60);
        let frf = sys.freq_response(&grid).unwrap();
        let peak = (0..grid.len())
            .map(|i| frf.scalar_value(i).unwrap().norm())
            .fold(0.0f64, f64::max);
        for (i, &w) in grid.iter().enumerate() {
            let mut dft = num_complex::Complex64::new(0.0, 0.0);
            for (k, &hk) in h.iter().enumerate() {
                dft += num_complex::Complex64::from_polar(hk, -w * TS * k as f64);
            }
            let direct = frf.scalar_value(i).unwrap();
            assert!(
                (dft - direct).norm() <= 1e-6 * peak,
                "mismatch {} at {w} rad/s",
                (dft - direct).norm()
            );
        }
    }

    #[test]
    fn series_matches_cascaded_simulation() {
        let a = TransferFunction::new(vec![0.0, 1.0, 0.5], vec![1.0, -0.3], TS).unwrap();
        let b = TransferFunction::new(vec![0.2, 0.1], vec![1.0, 0.4], TS).unwrap();
        let ab = a.series(&b).unwrap();
        let u = Signal::new((0..32).map(|k| (k as f64 * 0.7).sin()).collect(), TS).unwrap();
        let direct = ab.simulate(&u).unwrap();
        let chained = b.simulate(&a.simulate(&u).unwrap()).unwrap();
        for (x, y) in direct.samples().iter().zip(chained.samples()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}
