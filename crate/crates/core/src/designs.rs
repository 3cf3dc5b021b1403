//! Canonical design recipes tying the pieces together: build a
//! parametric model of the feedforward-to-error map, invert it into a
//! learning filter, and certify or repair the design against the true
//! response.

use crate::error::CoreResult;
use crate::frf::{FrequencyMask, Frf};
use crate::inversion::{design_inverse, reflect_boundary_zeros, InverseDesign};
use crate::modal::ContinuousModal;
use crate::plant::{printer_accurate_model, printer_rigid_model, Scenario};
use crate::robustness::{design_robustness_filter, RobustnessDesign};
use crate::transfer::{closed_loop_maps, TransferFunction};

/// Magnitude half-width around the unit circle inside which model zeros
/// are reflected before inversion. Zero-order-hold sampling places one
/// zero exactly at z = -1 for a pure mass and just inside for the modal
/// sums used here; everything further from the circle is inverted as-is.
pub const BOUNDARY_BAND: f64 = 5e-3;

/// Target radius for reflected boundary zeros. Closer to one keeps the
/// inverse more faithful near Nyquist but stretches its tails.
pub const BOUNDARY_RADIUS: f64 = 0.97;

/// Default anticausal tap budget for learning-filter designs.
pub const DEFAULT_PREVIEW_BUDGET: usize = 400;

/// Bandwidth of the canonical learning filters, rad/s. The raw model
/// inverse climbs to enormous gains where the plant rolls off; inverting
/// out there buys nothing (the model is least trustworthy exactly there)
/// and the huge leading taps turn the record boundary into an amplifier.
/// A zero-phase low-pass composed onto the inverse keeps the filter
/// faithful through the learning band and tame beyond it.
pub const INVERSION_BANDWIDTH: f64 = 2.0 * std::f64::consts::PI * 150.0;

/// Prototype length of the band-limiting low-pass.
pub const INVERSION_LOWPASS_TAPS: usize = 129;

/// Which parametric model backs the learning filter of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignModel {
    /// Mass line only; ignores every flexible mode.
    Rigid,
    /// Mass plus modes with the documented calibration error left in.
    Accurate,
    /// The true plant itself (virtual-bench luxury).
    Exact,
}

/// Band-limits a raw inverse design with the canonical zero-phase
/// low-pass, keeping the reported truncation residual.
fn band_limit(design: InverseDesign, sample_time: f64) -> CoreResult<InverseDesign> {
    let window = crate::robustness::zero_phase_lowpass(
        INVERSION_BANDWIDTH,
        INVERSION_LOWPASS_TAPS,
        sample_time,
    )?;
    Ok(InverseDesign {
        filter: design.filter.compose(&window)?.trimmed(1e-12),
        truncation_residual: design.truncation_residual,
    })
}

/// Learning filter from a continuous design model of the plant: the model
/// is discretized, closed with the scenario's controller into the
/// modelled feedforward-to-error map, boundary zeros are reflected, the
/// result is inverted into a two-sided filter, and the inverse is
/// band-limited to [`INVERSION_BANDWIDTH`].
pub fn learning_filter_from_model(
    plant_model: &ContinuousModal,
    controller: &TransferFunction,
    sample_time: f64,
    preview_budget: usize,
) -> CoreResult<InverseDesign> {
    let model_d = plant_model.discretize_zoh(sample_time)?;
    let (_, ps_hat) = closed_loop_maps(&model_d, controller)?;
    let safe = reflect_boundary_zeros(&ps_hat, BOUNDARY_BAND, BOUNDARY_RADIUS)?;
    band_limit(design_inverse(&safe, preview_budget)?, sample_time)
}

/// Inverts the scenario's true feedforward-to-error map without
/// reflection or band limiting: with the whole record available, one
/// update then cancels the error to numerical precision. That luxury is
/// for single-step analyses; iterated runs use the band-limited model
/// designs, whose moderate gains keep the record boundaries quiet.
pub fn exact_inverse_filter(
    scenario: &Scenario,
    preview_budget: usize,
) -> CoreResult<InverseDesign> {
    design_inverse(scenario.process_sensitivity(), preview_budget)
}

/// Learning filter for the canonical printer scenario with the chosen
/// design model.
pub fn printer_learning_filter(
    scenario: &Scenario,
    model: DesignModel,
    preview_budget: usize,
) -> CoreResult<InverseDesign> {
    match model {
        DesignModel::Rigid => learning_filter_from_model(
            &printer_rigid_model(),
            scenario.controller(),
            scenario.sample_time(),
            preview_budget,
        ),
        DesignModel::Accurate => learning_filter_from_model(
            &printer_accurate_model(),
            scenario.controller(),
            scenario.sample_time(),
            preview_budget,
        ),
        DesignModel::Exact => exact_inverse_filter(scenario, preview_budget),
    }
}

/// The scenario's true feedforward-to-error response on a grid: the
/// certification object a frequency response measurement would supply on
/// hardware.
pub fn measured_process_sensitivity(scenario: &Scenario, grid: &[f64]) -> CoreResult<Frf> {
    scenario.process_sensitivity().freq_response(grid)
}

/// Designs the robustness filter for a learning filter against the
/// scenario's true response on the masked grid.
pub fn printer_robustness_filter(
    scenario: &Scenario,
    learning: &crate::filter::NoncausalFilter,
    grid: &[f64],
    mask: &FrequencyMask,
) -> CoreResult<RobustnessDesign> {
    let frf = measured_process_sensitivity(scenario, grid)?;
    design_robustness_filter(&frf, learning, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::check_convergence;
    use crate::filter::NoncausalFilter;
    use crate::frf::default_grid;
    use crate::plant::default_printer_scenario;

    #[test]
    fn rigid_design_fails_certification_near_the_resonance() {
        let sc = default_printer_scenario();
        let design =
            printer_learning_filter(&sc, DesignModel::Rigid, DEFAULT_PREVIEW_BUDGET).unwrap();
        let grid = default_grid(sc.sample_time());
        let frf = measured_process_sensitivity(&sc, &grid).unwrap();
        let q = NoncausalFilter::identity(sc.sample_time());
        let report = check_convergence(&frf, &design.filter, &q, &FrequencyMask::all()).unwrap();
        assert!(!report.passed());
        let worst_hz = report.worst_frequency() / (2.0 * std::f64::consts::PI);
        assert!(
            (40.0..140.0).contains(&worst_hz),
            "violation at {worst_hz} Hz, expected near the belt resonance"
        );
    }

    #[test]
    fn robustness_filter_repairs_the_rigid_design() {
        let sc = default_printer_scenario();
        let design =
            printer_learning_filter(&sc, DesignModel::Rigid, DEFAULT_PREVIEW_BUDGET).unwrap();
        let grid = default_grid(sc.sample_time());
        let mask = FrequencyMask::all();
        let robust = printer_robustness_filter(&sc, &design.filter, &grid, &mask).unwrap();
        let frf = measured_process_sensitivity(&sc, &grid).unwrap();
        let report =
            check_convergence(&frf, &design.filter, &robust.filter, &mask).unwrap();
        assert!(report.passed(), "sup_rho = {}", report.sup_rho);
        assert!(robust.margin > 0.0);
    }

    #[test]
    fn accurate_design_beats_rigid_but_still_needs_robustness() {
        let sc = default_printer_scenario();
        let grid = default_grid(sc.sample_time());
        let frf = measured_process_sensitivity(&sc, &grid).unwrap();
        let q = NoncausalFilter::identity(sc.sample_time());
        let rigid =
            printer_learning_filter(&sc, DesignModel::Rigid, DEFAULT_PREVIEW_BUDGET).unwrap();
        let accurate =
            printer_learning_filter(&sc, DesignModel::Accurate, DEFAULT_PREVIEW_BUDGET).unwrap();
        let mask = FrequencyMask::all();
        let rr = check_convergence(&frf, &rigid.filter, &q, &mask).unwrap();
        let ra = check_convergence(&frf, &accurate.filter, &q, &mask).unwrap();
        assert!(ra.sup_rho < rr.sup_rho, "model extension must help");
        // The deliberate calibration error keeps a residual violation for
        // the robustness filter to handle.
        assert!(!ra.passed());
        let robust = printer_robustness_filter(&sc, &accurate.filter, &grid, &mask).unwrap();
        let rq = check_convergence(&frf, &accurate.filter, &robust.filter, &mask).unwrap();
        assert!(rq.passed());
    }

    #[test]
    fn exact_design_contracts_everywhere() {
        let sc = default_printer_scenario();
        let design =
            printer_learning_filter(&sc, DesignModel::Exact, DEFAULT_PREVIEW_BUDGET).unwrap();
        let grid = default_grid(sc.sample_time());
        let frf = measured_process_sensitivity(&sc, &grid).unwrap();
        let q = NoncausalFilter::identity(sc.sample_time());
        let report = check_convergence(&frf, &design.filter, &q, &FrequencyMask::all()).unwrap();
        assert!(report.passed());
        assert!(report.sup_rho < 1e-4, "sup_rho = {}", report.sup_rho);
    }
}
