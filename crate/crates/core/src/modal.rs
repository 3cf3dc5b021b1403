//! Continuous-time modal models of motion systems and their exact
//! zero-order-hold discretization.

use crate::error::{CoreError, CoreResult};
use crate::poly;
use crate::signal::check_sample_time;
use crate::transfer::TransferFunction;
use num_complex::Complex64;

/// One lightly damped flexible mode: residue / (s^2 + 2 zeta w s + w^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// Modal residue in 1/kg.
    pub residue: f64,
    /// Dimensionless damping ratio in [0, 1).
    pub damping: f64,
    /// Undamped natural frequency in rad/s.
    pub natural_frequency: f64,
}

/// A rigid-body mass plus a sum of flexible modes:
///
/// G(s) = 1/(m s^2) + sum_i r_i / (s^2 + 2 zeta_i w_i s + w_i^2)
///
/// the standard structure of mechatronic positioning stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModal {
    mass: f64,
    modes: Vec<Mode>,
}

impl ContinuousModal {
    pub fn new(mass: f64, modes: Vec<Mode>) -> CoreResult<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "mass must be positive, got {mass}"
            )));
        }
        for (i, m) in modes.iter().enumerate() {
            if !m.residue.is_finite() {
                return Err(CoreError::InvalidParameter(format!(
                    "mode {i}: non-finite residue"
                )));
            }
            if !(m.damping >= 0.0 && m.damping < 1.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "mode {i}: damping {} outside [0, 1)",
                    m.damping
                )));
            }
            if !(m.natural_frequency.is_finite() && m.natural_frequency > 0.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "mode {i}: natural frequency {} must be positive",
                    m.natural_frequency
                )));
            }
        }
        Ok(Self { mass, modes })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Evaluates G(s) at a complex frequency.
    pub fn eval_s(&self, s: Complex64) -> Complex64 {
        let mut g = (s * s * self.mass).inv();
        for m in &self.modes {
            let den = s * s
                + s * (2.0 * m.damping * m.natural_frequency)
                + m.natural_frequency * m.natural_frequency;
            g += Complex64::new(m.residue, 0.0) / den;
        }
        g
    }

    /// Analytic unit-step response at time `t >= 0`.
    pub fn step_response_at(&self, t: f64) -> f64 {
        let mut y = t * t / (2.0 * self.mass);
        for m in &self.modes {
            let wd = m.natural_frequency * (1.0 - m.damping * m.damping).sqrt();
            let c = m.damping / (1.0 - m.damping * m.damping).sqrt();
            let envelope = (-m.damping * m.natural_frequency * t).exp();
            let osc = (wd * t).cos() + c * (wd * t).sin();
            y += m.residue / (m.natural_frequency * m.natural_frequency) * (1.0 - envelope * osc);
        }
        y
    }

    /// Exact zero-order-hold discretization, mode by mode, summed into a
    /// single rational transfer function.
    ///
    /// Every mode must lie strictly below the Nyquist frequency.
    pub fn discretize_zoh(&self, sample_time: f64) -> CoreResult<TransferFunction> {
        check_sample_time(sample_time)?;
        let nyquist = std::f64::consts::PI / sample_time;
        for m in &self.modes {
            if m.natural_frequency >= nyquist {
                return Err(CoreError::Aliasing {
                    omega: m.natural_frequency,
                    nyquist,
                });
            }
        }
        let ts = sample_time;
        // Rigid body: ZOH of 1/(m s^2) is Ts^2 (z + 1) / (2 m (z - 1)^2).
        let g = ts * ts / (2.0 * self.mass);
        let mut num = vec![0.0, g, g];
        let mut den = vec![1.0, -2.0, 1.0];
        for m in &self.modes {
            let zeta = m.damping;
            let w0 = m.natural_frequency;
            let wd = w0 * (1.0 - zeta * zeta).sqrt();
            let a = (-zeta * w0 * ts).exp();
            let theta = wd * ts;
            let c = zeta / (1.0 - zeta * zeta).sqrt();
            let scale = m.residue / (w0 * w0);
            let b1 = 1.0 - a * (theta.cos() + c * theta.sin());
            let b2 = a * a - a * (theta.cos() - c * theta.sin());
            let mode_num = vec![0.0, scale * b1, scale * b2];
            let mode_den = vec![1.0, -2.0 * a * theta.cos(), a * a];
            num = poly::add(&poly::mul(&num, &mode_den), &poly::mul(&mode_num, &den));
            den = poly::mul(&den, &mode_den);
        }
        TransferFunction::new(num, den, ts)
    }
}
