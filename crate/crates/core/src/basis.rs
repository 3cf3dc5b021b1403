//! Basis-function feedforward: the command is constrained to a span of
//! reference-derived signals so the learned parameters survive reference
//! changes.
//!
//! Plain learned feedforward memorizes one task. When the reference
//! changes, the memorized signal turns into a disturbance and performance
//! collapses to the feedback-only level or worse. Parameterizing
//! f = Psi(r) theta with reference derivatives as columns keeps what was
//! learned valid for any reference the same physics applies to.

use crate::error::{CoreError, CoreResult};
use crate::lifted::LiftedOperator;
use crate::plant::Scenario;
use crate::signal::Signal;
use crate::trajectory::MotionProfile;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// One column generator: a linear, deterministic map from the reference
/// to a basis signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisGenerator {
    Position,
    Velocity,
    Acceleration,
    Jerk,
    Snap,
}

/// An ordered set of generators defining the feedforward span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    generators: Vec<BasisGenerator>,
}

impl BasisSpec {
    pub fn new(generators: Vec<BasisGenerator>) -> CoreResult<Self> {
        if generators.is_empty() {
            return Err(CoreError::InvalidParameter(
                "basis needs at least one generator".into(),
            ));
        }
        Ok(Self { generators })
    }

    pub fn generators(&self) -> &[BasisGenerator] {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }
}

/// Reference input for basis construction: a generated profile carries
/// exact derivatives; a bare signal falls back to central differences
/// (one-sided at the record ends).
#[derive(Debug, Clone, Copy)]
pub enum ReferenceData<'a> {
    Signal(&'a Signal),
    Profile(&'a MotionProfile),
}

impl<'a> ReferenceData<'a> {
    pub fn position(&self) -> &'a Signal {
        match self {
            ReferenceData::Signal(s) => s,
            ReferenceData::Profile(p) => p.position(),
        }
    }

    pub fn len(&self) -> usize {
        self.position().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_time(&self) -> f64 {
        self.position().sample_time()
    }
}

fn central_difference(x: &[f64], ts: f64) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n];
    d[0] = (x[1] - x[0]) / ts;
    d[n - 1] = (x[n - 1] - x[n - 2]) / ts;
    for k in 1..n - 1 {
        d[k] = (x[k + 1] - x[k - 1]) / (2.0 * ts);
    }
    d
}

fn numeric_derivative(r: &Signal, order: usize) -> Vec<f64> {
    let mut d = r.samples().to_vec();
    for _ in 0..order {
        d = central_difference(&d, r.sample_time());
    }
    d
}

fn generator_column(r: &ReferenceData, generator: BasisGenerator) -> CoreResult<Vec<f64>> {
    match r {
        ReferenceData::Profile(p) => {
            let signal = match generator {
                BasisGenerator::Position => p.position(),
                BasisGenerator::Velocity => p.velocity(),
                BasisGenerator::Acceleration => p.acceleration(),
                BasisGenerator::Jerk => p.jerk(),
                BasisGenerator::Snap => p.snap().ok_or_else(|| {
                    CoreError::InvalidParameter(
                        "snap basis requested but the profile has no snap".into(),
                    )
                })?,
            };
            Ok(signal.samples().to_vec())
        }
        ReferenceData::Signal(s) => {
            let order = match generator {
                BasisGenerator::Position => 0,
                BasisGenerator::Velocity => 1,
                BasisGenerator::Acceleration => 2,
                BasisGenerator::Jerk => 3,
                BasisGenerator::Snap => 4,
            };
            Ok(numeric_derivative(s, order))
        }
    }
}

/// Builds the N x p basis matrix: column k is generator k applied to the
/// reference. Linear in the reference by construction.
pub fn build_basis(r: &ReferenceData, spec: &BasisSpec) -> CoreResult<DMatrix<f64>> {
    let n = r.len();
    let mut m = DMatrix::zeros(n, spec.dim());
    for (j, &g) in spec.generators().iter().enumerate() {
        let col = generator_column(r, g)?;
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

/// Learned feedforward parameters, one entry per generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisParams {
    values: Vec<f64>,
}

impl BasisParams {
    pub fn new(values: Vec<f64>) -> CoreResult<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "non-finite parameter".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// The feedforward signal Psi(r) theta.
pub fn feedforward_from_params(
    params: &BasisParams,
    r: &ReferenceData,
    spec: &BasisSpec,
) -> CoreResult<Signal> {
    if params.dim() != spec.dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} parameters for a {}-column basis",
            params.dim(),
            spec.dim()
        )));
    }
    let psi = build_basis(r, spec)?;
    let theta = DVector::from_column_slice(params.values());
    let f = psi * theta;
    Signal::new(f.data.into(), r.sample_time())
}

/// Diagonal jitter scale applied to the regularized normal equations.
pub const NORMAL_EQUATION_JITTER: f64 = 1e-12;

/// One parameter update: theta_{j+1} = theta_j + argmin over dtheta of
/// w_e ||e_j - J Psi dtheta||^2 + w_dtheta ||dtheta||^2, solved in closed
/// form through the regularized normal equations (Cholesky, with a
/// relative diagonal jitter of [`NORMAL_EQUATION_JITTER`]).
///
/// `model_j` is the lifted feedforward-to-error map of the *model*;
/// model error shows up as slower parameter convergence, not bias in the
/// update law itself.
pub fn update_params(
    params: &BasisParams,
    error: &Signal,
    r: &ReferenceData,
    spec: &BasisSpec,
    model_j: &LiftedOperator,
    error_weight: f64,
    step_weight: f64,
) -> CoreResult<BasisParams> {
    if !(error_weight > 0.0 && error_weight.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "error weight must be positive, got {error_weight}"
        )));
    }
    if !(step_weight >= 0.0 && step_weight.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "step weight must be nonnegative, got {step_weight}"
        )));
    }
    if params.dim() != spec.dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} parameters for a {}-column basis",
            params.dim(),
            spec.dim()
        )));
    }
    if model_j.n() != error.len() || r.len() != error.len() {
        return Err(CoreError::LengthMismatch {
            left: model_j.n(),
            right: error.len(),
        });
    }
    let psi = build_basis(r, spec)?;
    let jpsi = model_j.matrix() * &psi;

    // Rank check when no regularization asks for leniency.
    if step_weight == 0.0 {
        let svd = jpsi.clone().svd(false, false);
        let sv = &svd.singular_values;
        let smax = sv.max();
        if smax == 0.0 || sv.min() <= 1e-10 * smax {
            return Err(CoreError::SingularUpdate);
        }
    }

    let gram = jpsi.transpose() * &jpsi * error_weight;
    let rhs = jpsi.transpose() * DVector::from_column_slice(error.samples()) * error_weight;
    let p = spec.dim();
    let mut lhs = gram + DMatrix::identity(p, p) * step_weight;
    let scale = (0..p).map(|i| lhs[(i, i)]).fold(0.0f64, f64::max);
    for i in 0..p {
        lhs[(i, i)] += NORMAL_EQUATION_JITTER * scale;
    }
    let chol = lhs.cholesky().ok_or(CoreError::SingularUpdate)?;
    let dtheta = chol.solve(&rhs);
    let values = params
        .values()
        .iter()
        .zip(dtheta.iter())
        .map(|(t, d)| t + d)
        .collect();
    BasisParams::new(values)
}

/// Per-task record of a basis-function learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisHistory {
    pub params: Vec<BasisParams>,
    pub error_norms: Vec<f64>,
    pub final_error: Signal,
}

/// Runs the basis-function learning iteration on a scenario with a fixed
/// reference.
pub fn run_basis_ilc(
    scenario: &Scenario,
    r: &ReferenceData,
    spec: &BasisSpec,
    model_j: &LiftedOperator,
    error_weight: f64,
    step_weight: f64,
    n_tasks: usize,
) -> CoreResult<BasisHistory> {
    if n_tasks == 0 {
        return Err(CoreError::InvalidParameter(
            "need at least one task".into(),
        ));
    }
    let mut theta = BasisParams::zeros(spec.dim());
    let mut params = Vec::with_capacity(n_tasks + 1);
    let mut error_norms = Vec::with_capacity(n_tasks);
    let mut last_error = Signal::zeros(r.len(), r.sample_time())?;
    params.push(theta.clone());
    for task_index in 0..n_tasks {
        let f = feedforward_from_params(&theta, r, spec)?;
        let result = scenario.run_task(r.position(), &f, task_index as u64)?;
        error_norms.push(result.error.norm2());
        last_error = result.error.clone();
        theta = update_params(
            &theta,
            &result.error,
            r,
            spec,
            model_j,
            error_weight,
            step_weight,
        )?;
        params.push(theta.clone());
    }
    Ok(BasisHistory {
        params,
        error_norms,
        final_error: last_error,
    })
}

/// Designs and task schedule for the reference-change comparison.
pub struct ReferenceChangeDesigns {
    /// Signal-domain learning filter.
    pub learning: crate::filter::NoncausalFilter,
    /// Signal-domain robustness filter.
    pub robustness: crate::filter::NoncausalFilter,
    pub alpha: f64,
    /// Basis specification for the parameterized branch.
    pub basis: BasisSpec,
    /// Lifted model map used by the parameter update.
    pub model_j: LiftedOperator,
    pub error_weight: f64,
    pub step_weight: f64,
    /// Task index at which the reference switches from the first to the
    /// second profile.
    pub switch_task: usize,
    pub n_tasks: usize,
}

/// Per-task error norms of the three strategies under a reference switch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceChangeReport {
    pub switch_task: usize,
    pub feedback_norms: Vec<f64>,
    pub signal_ilc_norms: Vec<f64>,
    pub basis_ilc_norms: Vec<f64>,
}

/// Runs feedback only, signal-domain learning, and basis-function
/// learning through a reference change and reports every task's error
/// norm. The signal-domain learner keeps updating after the switch; the
/// basis learner rebuilds its feedforward from the learned parameters and
/// the new reference.
pub fn demonstrate_reference_change(
    scenario: &Scenario,
    first: &ReferenceData,
    second: &ReferenceData,
    designs: &ReferenceChangeDesigns,
) -> CoreResult<ReferenceChangeReport> {
    if first.len() != second.len() {
        return Err(CoreError::LengthMismatch {
            left: first.len(),
            right: second.len(),
        });
    }
    if designs.switch_task == 0 || designs.switch_task >= designs.n_tasks {
        return Err(CoreError::InvalidParameter(
            "switch task must lie strictly inside the run".into(),
        ));
    }
    let n = first.len();
    let ts = first.sample_time();
    let reference_at = |task: usize| -> &ReferenceData {
        if task < designs.switch_task {
            first
        } else {
            second
        }
    };

    let mut feedback_norms = Vec::with_capacity(designs.n_tasks);
    for task in 0..designs.n_tasks {
        let r = reference_at(task);
        let zero = Signal::zeros(n, ts)?;
        let result = scenario.run_task(r.position(), &zero, task as u64)?;
        feedback_norms.push(result.error.norm2());
    }

    let mut signal_ilc_norms = Vec::with_capacity(designs.n_tasks);
    let mut f = Signal::zeros(n, ts)?;
    for task in 0..designs.n_tasks {
        let r = reference_at(task);
        let result = scenario.run_task(r.position(), &f, task as u64)?;
        signal_ilc_norms.push(result.error.norm2());
        f = crate::learning::ilc_update(
            &f,
            &result.error,
            &designs.learning,
            &designs.robustness,
            designs.alpha,
        )?;
    }

    let mut basis_ilc_norms = Vec::with_capacity(designs.n_tasks);
    let mut theta = BasisParams::zeros(designs.basis.dim());
    for task in 0..designs.n_tasks {
        let r = reference_at(task);
        let f = feedforward_from_params(&theta, r, &designs.basis)?;
        let result = scenario.run_task(r.position(), &f, task as u64)?;
        basis_ilc_norms.push(result.error.norm2());
        theta = update_params(
            &theta,
            &result.error,
            r,
            &designs.basis,
            &designs.model_j,
            designs.error_weight,
            designs.step_weight,
        )?;
    }

    Ok(ReferenceChangeReport {
        switch_task: designs.switch_task,
        feedback_norms,
        signal_ilc_norms,
        basis_ilc_norms,
    })
}
