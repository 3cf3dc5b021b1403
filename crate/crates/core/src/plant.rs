//! Virtual printer scenario: flexible plant under PD feedback with
//! encoder quantization and stochastic plus repeating disturbances.

use crate::error::{CoreError, CoreResult};
use crate::modal::{ContinuousModal, Mode};
use crate::signal::Signal;
use crate::trajectory::{fourth_order_profile, MotionLimits, MotionProfile};
use crate::transfer::{closed_loop_maps, TransferFunction};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Discrete PD controller with a backward-difference derivative:
/// K(z) = kp + kd (1 - z^{-1}) / Ts.
pub fn pd_controller(kp: f64, kd: f64, sample_time: f64) -> CoreResult<TransferFunction> {
    if !(kp.is_finite() && kp > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "proportional gain must be positive, got {kp}"
        )));
    }
    if !(kd.is_finite() && kd >= 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "derivative gain must be nonnegative, got {kd}"
        )));
    }
    TransferFunction::new(
        vec![kp + kd / sample_time, -kd / sample_time],
        vec![1.0],
        sample_time,
    )
}

/// One simulated task: the measured error, the measured (quantized)
/// position, and the feedforward that was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub error: Signal,
    pub measured_position: Signal,
    pub feedforward: Signal,
}

/// An immutable virtual test bench: plant and controller with their
/// closed-loop maps, measurement effects, and the disturbance model.
///
/// Tasks are pure functions of (scenario, inputs, task index); the noise
/// stream is seeded per task from `rng_seed ^ task_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    plant: TransferFunction,
    controller: TransferFunction,
    sensitivity: TransferFunction,
    process_sensitivity: TransferFunction,
    encoder_resolution: f64,
    noise_std: f64,
    repeating_disturbance: Option<Signal>,
    rng_seed: u64,
}

impl Scenario {
    pub fn new(
        plant: TransferFunction,
        controller: TransferFunction,
        encoder_resolution: f64,
        noise_std: f64,
        repeating_disturbance: Option<Signal>,
        rng_seed: u64,
    ) -> CoreResult<Self> {
        if !(encoder_resolution.is_finite() && encoder_resolution >= 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "encoder resolution must be >= 0, got {encoder_resolution}"
            )));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "noise std must be >= 0, got {noise_std}"
            )));
        }
        let (sensitivity, process_sensitivity) = closed_loop_maps(&plant, &controller)?;
        if let Some(d) = &repeating_disturbance {
            crate::signal::check_same_sample_time(plant.sample_time(), d.sample_time())?;
        }
        Ok(Self {
            plant,
            controller,
            sensitivity,
            process_sensitivity,
            encoder_resolution,
            noise_std,
            repeating_disturbance,
            rng_seed,
        })
    }

    pub fn plant(&self) -> &TransferFunction {
        &self.plant
    }

    pub fn controller(&self) -> &TransferFunction {
        &self.controller
    }

    /// Closed-loop error map S = 1/(1 + G K).
    pub fn sensitivity(&self) -> &TransferFunction {
        &self.sensitivity
    }

    /// Feedforward-to-error map GS = G/(1 + G K).
    pub fn process_sensitivity(&self) -> &TransferFunction {
        &self.process_sensitivity
    }

    pub fn sample_time(&self) -> f64 {
        self.plant.sample_time()
    }

    pub fn encoder_resolution(&self) -> f64 {
        self.encoder_resolution
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn repeating_disturbance(&self) -> Option<&Signal> {
        self.repeating_disturbance.as_ref()
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Copy with a different seed.
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }

    /// Idealized copy: no measurement noise, no quantization, no
    /// repeating disturbance. Used for noise-free learning analyses.
    pub fn noiseless(&self) -> Self {
        Self {
            encoder_resolution: 0.0,
            noise_std: 0.0,
            repeating_disturbance: None,
            ..self.clone()
        }
    }

    /// Output disturbance record for one task.
    fn disturbance(&self, n: usize, task_index: u64) -> CoreResult<Option<Signal>> {
        let mut v = match &self.repeating_disturbance {
            Some(d) => {
                if d.len() != n {
                    return Err(CoreError::LengthMismatch {
                        left: d.len(),
                        right: n,
                    });
                }
                Some(d.clone())
            }
            None => None,
        };
        if self.noise_std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed ^ task_index);
            let noise: Vec<f64> = (0..n)
                .map(|_| self.noise_std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let noise = Signal::new(noise, self.sample_time())?;
            v = Some(match v {
                Some(d) => d.try_add(&noise)?,
                None => noise,
            });
        }
        Ok(v)
    }

    /// Runs one task of the loop: e = S r - GS f - S v, with the position
    /// measurement quantized to the encoder resolution before the
    /// recorded error is formed. The true position drives nothing else;
    /// quantization is a pure measurement effect.
    pub fn run_task(&self, reference: &Signal, feedforward: &Signal, task_index: u64) -> CoreResult<TaskResult> {
        reference.check_compatible(feedforward)?;
        crate::signal::check_same_sample_time(self.sample_time(), reference.sample_time())?;
        let n = reference.len();
        let excitation = match self.disturbance(n, task_index)? {
            Some(v) => reference.try_sub(&v)?,
            None => reference.clone(),
        };
        let through_loop = self.sensitivity.simulate(&excitation)?;
        let through_ff = self.process_sensitivity.simulate(feedforward)?;
        let true_error = through_loop.try_sub(&through_ff)?;
        let position = reference.try_sub(&true_error)?;
        let measured = quantize(&position, self.encoder_resolution);
        let error = reference.try_sub(&measured)?;
        Ok(TaskResult {
            error,
            measured_position: measured,
            feedforward: feedforward.clone(),
        })
    }

    /// Runs `n_tasks` identical tasks (indices 0..n_tasks) and collects
    /// the results in task order.
    pub fn run_ensemble(
        &self,
        reference: &Signal,
        feedforward: &Signal,
        n_tasks: usize,
    ) -> CoreResult<Vec<TaskResult>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..n_tasks as u64)
                .into_par_iter()
                .map(|j| self.run_task(reference, feedforward, j))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        self.run_ensemble_seq(reference, feedforward, n_tasks)
    }

    /// Sequential fallback of [`Scenario::run_ensemble`]; results are
    /// identical because every task draws from its own seeded stream.
    pub fn run_ensemble_seq(
        &self,
        reference: &Signal,
        feedforward: &Signal,
        n_tasks: usize,
    ) -> CoreResult<Vec<TaskResult>> {
        (0..n_tasks as u64)
            .map(|j| self.run_task(reference, feedforward, j))
            .collect()
    }
}

fn quantize(position: &Signal, resolution: f64) -> Signal {
    if resolution <= 0.0 {
        return position.clone();
    }
    let samples = position
        .samples()
        .iter()
        .map(|y| (y / resolution).round() * resolution)
        .collect();
    Signal::new(samples, position.sample_time()).expect("quantization preserves validity")
}

/// Canonical virtual printer numbers. All values are artifact choices for
/// a desk-scale carriage: a light carriage driven through a belt whose
/// first flexible mode sits above the servo bandwidth.
pub mod printer {
    /// Sample time of the digital loop, seconds.
    pub const TS: f64 = 1e-3;
    /// Carriage mass, kg.
    pub const MASS: f64 = 0.25;
    /// Belt mode residue, 1/kg.
    pub const MODE_RESIDUE: f64 = 2.0;
    /// Belt mode damping ratio.
    pub const MODE_DAMPING: f64 = 0.03;
    /// Belt mode natural frequency, Hz.
    pub const MODE_HZ: f64 = 90.0;
    /// PD proportional gain.
    pub const KP: f64 = 200.0;
    /// PD derivative gain.
    pub const KD: f64 = 12.0;
    /// Linear encoder resolution, m.
    pub const ENCODER_RESOLUTION: f64 = 1e-6;
    /// Non-reproducible output noise standard deviation, m.
    pub const NOISE_STD: f64 = 1e-6;
    /// Default seed.
    pub const SEED: u64 = 0x5eed_1234;
    /// Move length, m.
    pub const DISPLACEMENT: f64 = 0.12;
    /// Reference limits: velocity m/s, acceleration m/s^2, jerk m/s^3,
    /// snap m/s^4.
    pub const V_MAX: f64 = 0.35;
    pub const A_MAX: f64 = 4.0;
    pub const J_MAX: f64 = 40.0;
    pub const S_MAX: f64 = 800.0;
    /// Dwell before the move and total padded record length, samples.
    pub const PAD_BEFORE: usize = 400;
    pub const RECORD_LEN: usize = 4096;
    /// Frequency error deliberately left in the "accurate" design model
    /// so its inverse is good but not perfect.
    pub const MODEL_FREQ_FACTOR: f64 = 1.06;
    pub const MODEL_DAMPING_FACTOR: f64 = 1.5;
}

/// The true printer plant: rigid-body mass plus one belt mode.
pub fn printer_plant_model() -> ContinuousModal {
    ContinuousModal::new(
        printer::MASS,
        vec![Mode {
            residue: printer::MODE_RESIDUE,
            damping: printer::MODE_DAMPING,
            natural_frequency: 2.0 * std::f64::consts::PI * printer::MODE_HZ,
        }],
    )
    .expect("canonical plant parameters are valid")
}

/// Rigid-body-only design model: the mass line alone.
pub fn printer_rigid_model() -> ContinuousModal {
    ContinuousModal::new(printer::MASS, vec![]).expect("valid")
}

/// Design model extended with the belt mode, deliberately a few percent
/// off in frequency and damping: good enough for fast learning, not so
/// good that robustness questions disappear.
pub fn printer_accurate_model() -> ContinuousModal {
    ContinuousModal::new(
        printer::MASS,
        vec![Mode {
            residue: printer::MODE_RESIDUE,
            damping: printer::MODE_DAMPING * printer::MODEL_DAMPING_FACTOR,
            natural_frequency: 2.0
                * std::f64::consts::PI
                * printer::MODE_HZ
                * printer::MODEL_FREQ_FACTOR,
        }],
    )
    .expect("valid")
}

/// The canonical virtual printer scenario.
pub fn default_printer_scenario() -> Scenario {
    let plant = printer_plant_model()
        .discretize_zoh(printer::TS)
        .expect("canonical plant discretizes");
    let controller =
        pd_controller(printer::KP, printer::KD, printer::TS).expect("canonical gains valid");
    Scenario::new(
        plant,
        controller,
        printer::ENCODER_RESOLUTION,
        printer::NOISE_STD,
        None,
        printer::SEED,
    )
    .expect("canonical scenario is stable")
}

/// The canonical printer move: a 4th-order profile with dwell before and
/// settle time after, padded to the canonical record length.
pub fn default_printer_profile() -> MotionProfile {
    fourth_order_profile(
        printer::DISPLACEMENT,
        &MotionLimits {
            velocity: printer::V_MAX,
            acceleration: printer::A_MAX,
            jerk: printer::J_MAX,
            snap: Some(printer::S_MAX),
        },
        printer::TS,
    )
    .expect("canonical profile parameters are feasible")
}

/// The canonical reference record (position profile with padding).
pub fn default_printer_reference() -> Signal {
    default_printer_profile()
        .position()
        .pad_to_total(printer::PAD_BEFORE, printer::RECORD_LEN)
        .expect("canonical record length fits the move")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifted::solve_convolution;
    use approx::assert_abs_diff_eq;

    const TS: f64 = 1e-3;

    #[test]
    fn pd_controller_trivial_cases() {
        let k = pd_controller(1.0, 0.0, TS).unwrap();
        assert_eq!(k.numerator(), &[1.0]);
        assert_eq!(k.denominator(), &[1.0]);
        assert!(pd_controller(0.0, 1.0, TS).is_err());
        assert!(pd_controller(-2.0, 1.0, TS).is_err());
    }

    /// Brute-force derivative-gain sweep on the rigid plant: P-only
    /// feedback on a double integrator is never stable; enough derivative
    /// action stabilizes it.
    #[test]
    fn pd_gain_sweep_on_double_integrator() {
        let plant = printer_rigid_model().discretize_zoh(TS).unwrap();
        let mut stable_flags = Vec::new();
        for i in 0..=20 {
            let kd = i as f64 * 2.0;
            let ok = if kd == 0.0 {
                closed_loop_maps(&plant, &pd_controller(200.0, 0.0, TS).unwrap()).is_ok()
            } else {
                closed_loop_maps(&plant, &pd_controller(200.0, kd, TS).unwrap()).is_ok()
            };
            stable_flags.push(ok);
        }
        assert!(!stable_flags[0], "P-only loop must be unstable");
        assert!(stable_flags.iter().any(|&s| s), "some kd must stabilize");
        // Once stable, staying stable for larger kd in this sweep range.
        let first = stable_flags.iter().position(|&s| s).unwrap();
        assert!(stable_flags[first..].iter().all(|&s| s));
    }

    #[test]
    fn canonical_scenario_is_stable_and_resonant() {
        let sc = default_printer_scenario();
        assert!(sc.sensitivity().is_stable());
        assert!(sc.process_sensitivity().is_stable());

        // The feedforward-to-error map shows one resonance peak above the
        // servo bandwidth: find the local maximum of |GS| on the grid.
        let grid = crate::frf::default_grid(TS);
        let frf = sc.process_sensitivity().freq_response(&grid).unwrap();
        let mags: Vec<f64> = (0..frf.len())
            .map(|i| frf.scalar_value(i).unwrap().norm())
            .collect();
        let mut peaks = Vec::new();
        for i in 1..mags.len() - 1 {
            if mags[i] > mags[i - 1] && mags[i] > mags[i + 1] {
                peaks.push(grid[i]);
            }
        }
        assert_eq!(peaks.len(), 1, "expected exactly one resonance peak");
        let peak_hz = peaks[0] / (2.0 * std::f64::consts::PI);
        assert!(
            (peak_hz - printer::MODE_HZ).abs() < 6.0,
            "peak at {peak_hz} Hz, expected near {} Hz",
            printer::MODE_HZ
        );
        // Above the crossover region.
        assert!(peak_hz > 15.0);
    }

    #[test]
    fn zero_feedforward_zero_disturbance_error_is_sensitivity_output() {
        let sc = default_printer_scenario().noiseless();
        let r = default_printer_reference();
        let f = Signal::zeros(r.len(), TS).unwrap();
        let task = sc.run_task(&r, &f, 0).unwrap();
        let direct = sc.sensitivity().simulate(&r).unwrap();
        for (a, b) in task.error.samples().iter().zip(direct.samples()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn perfect_feedforward_nulls_the_error() {
        let sc = default_printer_scenario().noiseless();
        let r = default_printer_reference();
        let target = sc.sensitivity().simulate(&r).unwrap();
        let h = sc.process_sensitivity().impulse_response(r.len());
        let f = solve_convolution(&h, target.samples()).unwrap();
        let task = sc
            .run_task(&r, &Signal::new(f, TS).unwrap(), 0)
            .unwrap();
        assert!(
            task.error.norm2() <= 1e-9 * target.norm2().max(1.0),
            "residual {} too large",
            task.error.norm2()
        );
    }

    #[test]
    fn tasks_are_bitwise_deterministic() {
        let sc = default_printer_scenario();
        let r = default_printer_reference();
        let f = Signal::zeros(r.len(), TS).unwrap();
        let a = sc.run_task(&r, &f, 3).unwrap();
        let b = sc.run_task(&r, &f, 3).unwrap();
        assert_eq!(a, b);
        let c = sc.run_task(&r, &f, 4).unwrap();
        assert_ne!(a.error, c.error, "different tasks draw different noise");
    }

    #[test]
    fn ensemble_matches_sequential_fallback() {
        let sc = default_printer_scenario();
        let r = default_printer_reference();
        let f = Signal::zeros(r.len(), TS).unwrap();
        let par = sc.run_ensemble(&r, &f, 5).unwrap();
        let seq = sc.run_ensemble_seq(&r, &f, 5).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn quantization_error_is_bounded_by_half_resolution() {
        let res = 1e-5;
        let sc = Scenario::new(
            default_printer_scenario().plant().clone(),
            default_printer_scenario().controller().clone(),
            res,
            0.0,
            None,
            1,
        )
        .unwrap();
        let r = default_printer_reference();
        let f = Signal::zeros(r.len(), TS).unwrap();
        let task = sc.run_task(&r, &f, 0).unwrap();
        // Reconstruct the true position from the noiseless linear maps.
        let true_error = sc
            .sensitivity()
            .simulate(&r)
            .unwrap();
        let true_position = r.try_sub(&true_error).unwrap();
        for (m, t) in task
            .measured_position
            .samples()
            .iter()
            .zip(true_position.samples())
        {
            assert!((m - t).abs() <= res / 2.0 + 1e-12);
        }
    }

    /// The sample mean over many noisy tasks converges to the noise-free
    /// error at the Monte-Carlo rate. Quantization is switched off here:
    /// it adds a deterministic bias that does not average out, which the
    /// quantization bound test covers separately. The expected squared
    /// norm of the mean's deviation is sigma^2 ||S||_F^2 / n_tasks
    /// (lifted Frobenius norm); a single draw concentrates tightly for
    /// records this long, so a wide band around it is a generous
    /// three-sigma-style check.
    #[test]
    fn noise_mean_converges_at_root_n_rate() {
        let base = default_printer_scenario();
        let sc = Scenario::new(
            base.plant().clone(),
            base.controller().clone(),
            0.0,
            base.noise_std(),
            None,
            base.rng_seed(),
        )
        .unwrap();
        // Moderate record keeps the lifted Frobenius sum cheap.
        let r = default_printer_profile()
            .position()
            .pad_to_total(50, 900)
            .unwrap();
        let f = Signal::zeros(r.len(), TS).unwrap();
        let clean = sc.sensitivity().simulate(&r).unwrap();

        let h = sc.sensitivity().impulse_response(r.len());
        // ||S_N||_F^2 = sum_k (N - k) h[k]^2 for the lifted lower
        // triangular Toeplitz matrix.
        let n = r.len();
        let frob2: f64 = h
            .iter()
            .enumerate()
            .map(|(k, hk)| (n - k) as f64 * hk * hk)
            .sum();

        for &n_tasks in &[10usize, 100, 1000] {
            let tasks = sc.run_ensemble(&r, &f, n_tasks).unwrap();
            let mut mean = vec![0.0; n];
            for t in &tasks {
                for (m, e) in mean.iter_mut().zip(t.error.samples()) {
                    *m += e / n_tasks as f64;
                }
            }
            let dev2: f64 = mean
                .iter()
                .zip(clean.samples())
                .map(|(m, c)| (m - c) * (m - c))
                .sum();
            let expected = sc.noise_std().powi(2) * frob2 / n_tasks as f64;
            assert!(
                dev2 > 0.3 * expected && dev2 < 2.5 * expected,
                "n_tasks={n_tasks}: deviation {dev2:.3e} vs expected {expected:.3e}"
            );
        }
    }
}
