//! Noncausal learning-filter design by stable model inversion.
//!
//! The inverse of the feedforward-to-error model is realized as a
//! two-sided FIR filter: pure delays become pure preview, minimum-phase
//! numerator factors are inverted causally, and nonminimum-phase factors
//! are inverted anticausally. The anticausal tail is truncated to the
//! preview budget and the discarded mass is reported, making the
//! approximation explicit.

use crate::error::{CoreError, CoreResult};
use crate::filter::NoncausalFilter;
use crate::poly;
use crate::transfer::TransferFunction;
use num_complex::Complex64;

/// Magnitude band around the unit circle inside which a model zero is
/// declared uninvertible.
pub const UNIT_CIRCLE_TOL: f64 = 1e-6;

/// Relative tap mass (one-norm) allowed to be discarded on either side
/// when truncating the two-sided inverse.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// A designed inverse filter together with the truncation it committed.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseDesign {
    pub filter: NoncausalFilter,
    /// Fraction of the impulse-response one-norm discarded by truncating
    /// both tails.
    pub truncation_residual: f64,
}

/// Designs a two-sided FIR approximation of `1 / model`.
///
/// `preview_budget` caps the number of anticausal taps. The causal side
/// sizes itself to the truncation tolerance. Models with zeros within
/// [`UNIT_CIRCLE_TOL`] of the unit circle are rejected: no stable inverse
/// exists there, and a zero at z = +1 (integral action in the loop) is
/// reported as such.
pub fn design_inverse(
    model: &TransferFunction,
    preview_budget: usize,
) -> CoreResult<InverseDesign> {
    let num = poly::trim(model.numerator().to_vec());
    if num.iter().all(|&c| c == 0.0) {
        return Err(CoreError::InvalidParameter(
            "cannot invert an identically zero model".into(),
        ));
    }
    let delay = num.iter().take_while(|&&c| c == 0.0).count();
    let reduced = &num[delay..];
    let lead = reduced[0];

    // Zeros in the z plane; roots of the reduced numerator in w = z^{-1}.
    let zeros: Vec<Complex64> = poly::roots(reduced).iter().map(|w| w.inv()).collect();
    for z in &zeros {
        if (z.norm() - 1.0).abs() < UNIT_CIRCLE_TOL {
            return Err(CoreError::InversionSingularity { re: z.re, im: z.im });
        }
    }
    let inside: Vec<Complex64> = zeros.iter().copied().filter(|z| z.norm() < 1.0).collect();
    let outside: Vec<Complex64> = zeros.iter().copied().filter(|z| z.norm() > 1.0).collect();

    // Window sizes from the slowest decay on each side, with headroom so
    // tail measurement stays meaningful.
    let causal_len = side_length(inside.iter().map(|z| z.norm()))
        + model.denominator().len()
        + 16;
    let preview_len = side_length(outside.iter().map(|z| z.norm().recip())) + delay + 16;

    // Working buffer over lags [-(preview_len), causal_len], complex to
    // let conjugate root pairs cancel at the end.
    let lo = -(preview_len as i64);
    let hi = causal_len as i64;
    let len = (hi - lo + 1) as usize;
    let idx = |lag: i64| (lag - lo) as usize;
    let mut g = vec![Complex64::new(0.0, 0.0); len];

    // Start from the model denominator scaled by the numerator's leading
    // coefficient, shifted left by the pure delay: 1/model =
    // z^{+delay} den(z^{-1}) / (lead prod_i (1 - z_i z^{-1})).
    for (k, &c) in model.denominator().iter().enumerate() {
        let lag = k as i64 - delay as i64;
        if lag >= lo && lag <= hi {
            g[idx(lag)] = Complex64::new(c / lead, 0.0);
        }
    }

    // Causal expansions first (ascending recursion), anticausal after
    // (descending recursion); by then the causal tails have decayed
    // inside the window, so starting the backward recursions from zero
    // beyond the window is accurate.
    for z in &inside {
        let mut prev = Complex64::new(0.0, 0.0);
        for slot in g.iter_mut() {
            *slot += *z * prev;
            prev = *slot;
        }
    }
    for z in &outside {
        let mut prev = Complex64::new(0.0, 0.0);
        let mut prev_x = Complex64::new(0.0, 0.0);
        for slot in g.iter_mut().rev() {
            let x = *slot;
            *slot = (prev - prev_x) / z;
            prev = *slot;
            prev_x = x;
        }
    }

    let taps_full: Vec<f64> = g.iter().map(|c| c.re).collect();
    let total_mass: f64 = taps_full.iter().map(|t| t.abs()).sum();
    if total_mass == 0.0 {
        return Err(CoreError::InvalidParameter(
            "inverse impulse response vanished".into(),
        ));
    }

    // Required preview: smallest P whose discarded leading mass is below
    // tolerance.
    let budget = TRUNCATION_TOL * total_mass;
    let mut lead_mass = 0.0;
    let mut cut_front = 0usize;
    for (i, t) in taps_full.iter().enumerate() {
        let lag = lo + i as i64;
        if lag >= 0 {
            break;
        }
        lead_mass += t.abs();
        if lead_mass > budget {
            cut_front = i;
            break;
        }
        cut_front = i + 1;
    }
    let required_preview = (-(lo + cut_front as i64)).max(0) as usize;
    if required_preview > preview_budget {
        return Err(CoreError::PreviewBudget {
            required: required_preview,
        });
    }

    // Trailing truncation to tolerance.
    let mut tail_mass = 0.0;
    let mut cut_back = taps_full.len();
    for (i, t) in taps_full.iter().enumerate().rev() {
        let lag = lo + i as i64;
        if lag <= 0 {
            break;
        }
        tail_mass += t.abs();
        if tail_mass > budget {
            cut_back = i + 1;
            break;
        }
        cut_back = i;
    }

    let kept = taps_full[cut_front..cut_back].to_vec();
    let discarded: f64 = taps_full[..cut_front]
        .iter()
        .chain(&taps_full[cut_back..])
        .map(|t| t.abs())
        .sum();
    let preview = (-(lo + cut_front as i64)).max(0) as usize;
    let filter = NoncausalFilter::new(kept, preview, model.sample_time())?;
    Ok(InverseDesign {
        filter,
        truncation_residual: discarded / total_mass,
    })
}

/// Taps needed for a geometric decay `rate^k` to fall below the
/// truncation tolerance, with a hard cap.
fn side_length(rates: impl Iterator<Item = f64>) -> usize {
    let mut len = 0usize;
    for rate in rates {
        let r = rate.clamp(0.0, 1.0 - 1e-9);
        let needed = if r == 0.0 {
            1
        } else {
            ((TRUNCATION_TOL * 1e-3).ln() / r.ln()).ceil() as usize
        };
        len += needed.min(30_000);
    }
    len.min(60_000)
}

/// Reflects numerator zeros in a band around the unit circle to a safe
/// interior radius, preserving the numerator's DC gain.
///
/// Zero-order-hold sampling of double-integrator dynamics places a zero
/// exactly at z = -1, which no stable inverse can cancel; practical
/// learning-filter designs move such zeros slightly inside the circle and
/// accept a small high-frequency inversion error. `band` is the magnitude
/// half-width around 1 that triggers the reflection and `radius` the
/// target magnitude.
pub fn reflect_boundary_zeros(
    model: &TransferFunction,
    band: f64,
    radius: f64,
) -> CoreResult<TransferFunction> {
    if !(band > 0.0 && radius > 0.0 && radius < 1.0) {
        return Err(CoreError::InvalidParameter(
            "need band > 0 and 0 < radius < 1".into(),
        ));
    }
    let num = poly::trim(model.numerator().to_vec());
    let delay = num.iter().take_while(|&&c| c == 0.0).count();
    let reduced = &num[delay..];
    if reduced.is_empty() || reduced.iter().all(|&c| c == 0.0) {
        return Err(CoreError::InvalidParameter(
            "model numerator is zero".into(),
        ));
    }
    let zeros: Vec<Complex64> = poly::roots(reduced).iter().map(|w| w.inv()).collect();

    // Rebuild the numerator from its (possibly moved) zeros. Moved zeros
    // come in conjugate-closed sets, so the DC correction
    // prod (1 - z_i) / prod (1 - z_i') is real; applying it keeps the
    // numerator's DC gain (including its sign) unchanged.
    let mut coeffs = vec![Complex64::new(reduced[0], 0.0)];
    let one = Complex64::new(1.0, 0.0);
    let mut old_dc = one;
    let mut new_dc = one;
    for z in zeros {
        let moved = if (z.norm() - 1.0).abs() < band {
            Complex64::from_polar(radius, z.arg())
        } else {
            z
        };
        if moved != z {
            old_dc *= one - z;
            new_dc *= one - moved;
        }
        // Multiply coeffs by (1 - moved * w).
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * moved;
        }
        coeffs = next;
    }
    let dc_scale = if new_dc.norm() > 0.0 {
        (old_dc / new_dc).re
    } else {
        1.0
    };
    let mut new_num = vec![0.0; delay];
    for c in &coeffs {
        new_num.push(c.re * dc_scale);
    }
    TransferFunction::new(new_num, model.denominator().to_vec(), model.sample_time())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Signal;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TS: f64 = 1e-3;

    #[test]
    fn pure_delay_inverts_to_pure_preview() {
        for d in [1usize, 4, 9] {
            let model = TransferFunction::delay(d, TS).unwrap();
            let design = design_inverse(&model, 16).unwrap();
            assert_eq!(design.filter.preview(), d);
            assert_abs_diff_eq!(design.filter.tap_at_lag(-(d as i64)), 1.0, epsilon = 1e-14);
            let energy: f64 = design.filter.taps().iter().map(|t| t * t).sum();
            assert_abs_diff_eq!(energy, 1.0, epsilon = 1e-12);
            assert_eq!(design.truncation_residual, 0.0);
        }
    }

    #[test]
    fn delay_larger_than_budget_reports_requirement() {
        let model = TransferFunction::delay(7, TS).unwrap();
        match design_inverse(&model, 3) {
            Err(CoreError::PreviewBudget { required }) => assert_eq!(required, 7),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn static_gain_inverts_to_single_tap() {
        let model = TransferFunction::gain(4.0, TS).unwrap();
        let design = design_inverse(&model, 8).unwrap();
        assert_eq!(design.filter.preview(), 0);
        assert_eq!(design.filter.taps().len(), 1);
        assert_abs_diff_eq!(design.filter.taps()[0], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn unit_circle_zero_is_rejected() {
        // Numerator (1 + z^{-1}): zero exactly at z = -1.
        let model = TransferFunction::new(vec![1.0, 1.0], vec![1.0], TS).unwrap();
        assert!(matches!(
            design_inverse(&model, 32),
            Err(CoreError::InversionSingularity { .. })
        ));
        // Zero at z = +1 (integral action) is equally rejected.
        let model = TransferFunction::new(vec![1.0, -1.0], vec![1.0], TS).unwrap();
        match design_inverse(&model, 32) {
            Err(CoreError::InversionSingularity { re, .. }) => {
                assert!((re - 1.0).abs() < 1e-9)
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    /// Nonminimum-phase model: the inversion residual, measured by
    /// driving the model with the filtered signal, stays below 1e-6 for
    /// interior-supported inputs.
    #[test]
    fn nonminimum_phase_inversion_residual_is_small() {
        // zero at z = -1.2 and a stable pole: (1 + 1.2 z^{-1}) delayed by
        // one sample over (1 - 0.5 z^{-1}).
        let model =
            TransferFunction::new(vec![0.0, 1.0, 1.2], vec![1.0, -0.5], TS).unwrap();
        let design = design_inverse(&model, 200).unwrap();
        assert!(design.truncation_residual < 1e-9);
        let n = 512;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut x = vec![0.0; n];
        for v in x.iter_mut().take(380).skip(150) {
            *v = rng.random::<f64>() - 0.5;
        }
        let x = Signal::new(x, TS).unwrap();
        let f = design.filter.apply(&x).unwrap();
        let y = model.simulate(&f).unwrap();
        let err = y.try_sub(&x).unwrap();
        assert!(
            err.norm2() / x.norm2() < 1e-6,
            "relative residual {}",
            err.norm2() / x.norm2()
        );
    }

    #[test]
    fn minimum_phase_model_needs_only_pure_delay_preview() {
        let model =
            TransferFunction::new(vec![0.0, 0.0, 1.0, 0.4], vec![1.0, -0.9, 0.2], TS).unwrap();
        let design = design_inverse(&model, 8).unwrap();
        assert_eq!(design.filter.preview(), 2);
    }

    #[test]
    fn reflection_moves_boundary_zero_inside_and_keeps_dc_gain() {
        // ZOH double integrator: numerator zero exactly at z = -1.
        let model = crate::plant::printer_rigid_model()
            .discretize_zoh(TS)
            .unwrap();
        let reflected = reflect_boundary_zeros(&model, 0.02, 0.9).unwrap();
        for z in reflected.zeros() {
            assert!(z.norm() < 0.95);
        }
        let dc_before = model.eval_omega(1e-2).norm();
        let dc_after = reflected.eval_omega(1e-2).norm();
        assert_abs_diff_eq!(dc_after / dc_before, 1.0, epsilon = 1e-6);
        // And the reflected model now inverts cleanly.
        assert!(design_inverse(&reflected, 64).is_ok());
    }
}
