//! Experiment configuration: JSON schema, validation, and construction
//! of the library objects.
//!
//! Every physical quantity carries its unit in the field name. Unknown
//! keys are rejected, and validation reports every violation it finds,
//! not just the first.

use ilcbench_core::basis::{BasisGenerator, BasisSpec};
use ilcbench_core::designs;
use ilcbench_core::frf::FrequencyMask;
use ilcbench_core::inversion::InverseDesign;
use ilcbench_core::modal::{ContinuousModal, Mode};
use ilcbench_core::plant::{pd_controller, Scenario};
use ilcbench_core::signal::Signal;
use ilcbench_core::trajectory::{
    fourth_order_profile, third_order_profile, MotionLimits, MotionProfile,
};
use ilcbench_core::transfer::TransferFunction;
use serde::{Deserialize, Serialize};

/// A field-level validation failure.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Configuration parse/validation errors.
#[derive(Debug)]
pub enum ConfigError {
    /// JSON syntax problem, with line and column.
    Syntax { line: usize, column: usize, message: String },
    /// Structurally valid JSON that violates the schema or semantics.
    Invalid(Vec<Violation>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Syntax {
                line,
                column,
                message,
            } => write!(f, "syntax error at line {line}, column {column}: {message}"),
            ConfigError::Invalid(violations) => {
                writeln!(f, "{} configuration violation(s):", violations.len())?;
                for v in violations {
                    writeln!(f, "  {}: {}", v.field, v.message)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub residue_per_kg: f64,
    pub damping_ratio: f64,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModalPlantConfig {
    pub mass_kg: f64,
    #[serde(default)]
    pub modes: Vec<ModeConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PlantConfig {
    Modal(ModalPlantConfig),
    Rational {
        numerator: Vec<f64>,
        denominator: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PdConfig {
    pub kp: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: PlantConfig,
    pub controller: PdConfig,
    pub ts_s: f64,
    pub encoder_resolution_m: f64,
    pub noise_std_m: f64,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeating_disturbance_m: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FourthOrderConfig {
    pub displacement_m: f64,
    pub v_max_mps: f64,
    pub a_max_mps2: f64,
    pub j_max_mps3: f64,
    pub s_max_mps4: f64,
    pub pad_before_samples: usize,
    pub total_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThirdOrderConfig {
    pub displacement_m: f64,
    pub v_max_mps: f64,
    pub a_max_mps2: f64,
    pub j_max_mps3: f64,
    pub pad_before_samples: usize,
    pub total_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ReferenceConfig {
    FourthOrder(FourthOrderConfig),
    ThirdOrder(ThirdOrderConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum LearningModelConfig {
    /// Mass line of the modal plant only.
    Rigid,
    /// Modal plant with the canonical calibration error left in.
    Accurate,
    /// The true closed-loop map itself.
    Exact,
    /// Explicit design model.
    Modal(ModalPlantConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum RobustnessConfig {
    /// No robustness filtering (Q = 1).
    Unity,
    /// Designed zero-phase low-pass against the true response.
    Designed,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub generators: Vec<BasisGenerator>,
    pub error_weight: f64,
    pub step_weight: f64,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IlcConfig {
    pub learning_model: LearningModelConfig,
    pub preview_samples: usize,
    pub robustness: RobustnessConfig,
    /// Learning gain; defaults to one, the plain update law.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub n_tasks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_tasks: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_hz: Option<f64>,
}

/// Top-level experiment description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub reference: ReferenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ilc: Option<IlcConfig>,
    pub ensemble: EnsembleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskConfig>,
    #[serde(default)]
    pub analysis_only: bool,
    #[serde(default)]
    pub require_pass: bool,
    #[serde(default)]
    pub write_signals: bool,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            ConfigError::Syntax {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            }
        } else {
            ConfigError::Invalid(vec![Violation {
                field: format!("line {}, column {}", e.line(), e.column()),
                message: e.to_string(),
            }])
        }
    })?;
    let violations = cfg.validate();
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

impl ExperimentConfig {
    /// Collects every semantic violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let err = |v: &mut Vec<Violation>, field: &str, message: String| {
            v.push(Violation {
                field: field.to_string(),
                message,
            });
        };

        if !(self.scenario.ts_s.is_finite() && self.scenario.ts_s > 0.0) {
            err(&mut v, "scenario.ts_s", "must be positive".into());
        }
        match &self.scenario.plant {
            PlantConfig::Modal(m) => {
                if !(m.mass_kg.is_finite() && m.mass_kg > 0.0) {
                    err(&mut v, "scenario.plant.modal.mass_kg", "must be positive".into());
                }
                for (i, mode) in m.modes.iter().enumerate() {
                    if !(mode.frequency_hz.is_finite() && mode.frequency_hz > 0.0) {
                        err(
                            &mut v,
                            &format!("scenario.plant.modal.modes[{i}].frequency_hz"),
                            "must be positive".into(),
                        );
                    } else if self.scenario.ts_s > 0.0
                        && mode.frequency_hz >= 0.5 / self.scenario.ts_s
                    {
                        err(
                            &mut v,
                            &format!("scenario.plant.modal.modes[{i}].frequency_hz"),
                            "must lie below the Nyquist frequency".into(),
                        );
                    }
                    if !(mode.damping_ratio >= 0.0 && mode.damping_ratio < 1.0) {
                        err(
                            &mut v,
                            &format!("scenario.plant.modal.modes[{i}].damping_ratio"),
                            "must lie in [0, 1)".into(),
                        );
                    }
                }
            }
            PlantConfig::Rational {
                numerator,
                denominator,
            } => {
                if denominator.first().copied().unwrap_or(0.0) == 0.0 {
                    err(
                        &mut v,
                        "scenario.plant.rational.denominator",
                        "leading coefficient must be nonzero".into(),
                    );
                }
                if numerator.is_empty() {
                    err(
                        &mut v,
                        "scenario.plant.rational.numerator",
                        "must not be empty".into(),
                    );
                }
            }
        }
        if !(self.scenario.controller.kp.is_finite() && self.scenario.controller.kp > 0.0) {
            err(&mut v, "scenario.controller.kp", "must be positive".into());
        }
        if !(self.scenario.controller.kd.is_finite() && self.scenario.controller.kd >= 0.0) {
            err(&mut v, "scenario.controller.kd", "must be nonnegative".into());
        }
        if !(self.scenario.encoder_resolution_m.is_finite()
            && self.scenario.encoder_resolution_m >= 0.0)
        {
            err(
                &mut v,
                "scenario.encoder_resolution_m",
                "must be nonnegative".into(),
            );
        }
        if !(self.scenario.noise_std_m.is_finite() && self.scenario.noise_std_m >= 0.0) {
            err(&mut v, "scenario.noise_std_m", "must be nonnegative".into());
        }

        let (d, bounds, pad, total, prefix): (f64, Vec<(f64, &str)>, usize, usize, &str) =
            match &self.reference {
                ReferenceConfig::FourthOrder(c) => (
                    c.displacement_m,
                    vec![
                        (c.v_max_mps, "v_max_mps"),
                        (c.a_max_mps2, "a_max_mps2"),
                        (c.j_max_mps3, "j_max_mps3"),
                        (c.s_max_mps4, "s_max_mps4"),
                    ],
                    c.pad_before_samples,
                    c.total_samples,
                    "reference.fourth_order",
                ),
                ReferenceConfig::ThirdOrder(c) => (
                    c.displacement_m,
                    vec![
                        (c.v_max_mps, "v_max_mps"),
                        (c.a_max_mps2, "a_max_mps2"),
                        (c.j_max_mps3, "j_max_mps3"),
                    ],
                    c.pad_before_samples,
                    c.total_samples,
                    "reference.third_order",
                ),
            };
        if !(d.is_finite() && d != 0.0) {
            err(
                &mut v,
                &format!("{prefix}.displacement_m"),
                "must be nonzero".into(),
            );
        }
        for (b, name) in bounds {
            if !(b.is_finite() && b > 0.0) {
                err(&mut v, &format!("{prefix}.{name}"), "must be positive".into());
            }
        }
        if total <= pad {
            err(
                &mut v,
                &format!("{prefix}.total_samples"),
                "must exceed pad_before_samples".into(),
            );
        }

        if let Some(ilc) = &self.ilc {
            if !(ilc.alpha > 0.0 && ilc.alpha <= 1.0) {
                err(&mut v, "ilc.alpha", "must lie in (0, 1]".into());
            }
            if ilc.n_tasks == 0 {
                err(&mut v, "ilc.n_tasks", "must be at least one".into());
            }
            if matches!(
                ilc.learning_model,
                LearningModelConfig::Rigid | LearningModelConfig::Accurate
            ) && matches!(self.scenario.plant, PlantConfig::Rational { .. })
            {
                err(
                    &mut v,
                    "ilc.learning_model",
                    "rigid/accurate models need a modal plant description".into(),
                );
            }
            if let Some(b) = &ilc.basis {
                if b.generators.is_empty() {
                    err(&mut v, "ilc.basis.generators", "must not be empty".into());
                }
                if !(b.error_weight.is_finite() && b.error_weight > 0.0) {
                    err(&mut v, "ilc.basis.error_weight", "must be positive".into());
                }
                if !(b.step_weight.is_finite() && b.step_weight >= 0.0) {
                    err(&mut v, "ilc.basis.step_weight", "must be nonnegative".into());
                }
            }
        } else if !self.analysis_only {
            err(
                &mut v,
                "ilc",
                "required unless analysis_only is set".into(),
            );
        }
        if self.ensemble.n_tasks < 2 {
            err(&mut v, "ensemble.n_tasks", "must be at least two".into());
        }
        if let Some(m) = &self.mask {
            let lo = m.min_hz.unwrap_or(0.0);
            let hi = m.max_hz.unwrap_or(f64::INFINITY);
            if !(lo >= 0.0 && hi > lo) {
                err(&mut v, "mask", "min_hz/max_hz must describe a band".into());
            }
        }
        v
    }

    /// Builds the scenario; semantic validity is assumed (call
    /// [`ExperimentConfig::validate`] first), construction errors are
    /// still surfaced as violations.
    pub fn build_scenario(&self) -> Result<Scenario, ConfigError> {
        let ts = self.scenario.ts_s;
        let plant = match &self.scenario.plant {
            PlantConfig::Modal(m) => modal_from_config(m)
                .and_then(|model| model.discretize_zoh(ts))
                .map_err(|e| invalid("scenario.plant", &e.to_string()))?,
            PlantConfig::Rational {
                numerator,
                denominator,
            } => TransferFunction::new(numerator.clone(), denominator.clone(), ts)
                .map_err(|e| invalid("scenario.plant.rational", &e.to_string()))?,
        };
        let controller = pd_controller(self.scenario.controller.kp, self.scenario.controller.kd, ts)
            .map_err(|e| invalid("scenario.controller", &e.to_string()))?;
        let disturbance = match &self.scenario.repeating_disturbance_m {
            Some(samples) => Some(
                Signal::new(samples.clone(), ts)
                    .map_err(|e| invalid("scenario.repeating_disturbance_m", &e.to_string()))?,
            ),
            None => None,
        };
        Scenario::new(
            plant,
            controller,
            self.scenario.encoder_resolution_m,
            self.scenario.noise_std_m,
            disturbance,
            self.scenario.rng_seed,
        )
        .map_err(|e| invalid("scenario", &e.to_string()))
    }

    /// Builds the reference profile and its padded record.
    pub fn build_reference(&self) -> Result<(MotionProfile, Signal), ConfigError> {
        let ts = self.scenario.ts_s;
        let (profile, pad, total) = match &self.reference {
            ReferenceConfig::FourthOrder(c) => (
                fourth_order_profile(
                    c.displacement_m,
                    &MotionLimits {
                        velocity: c.v_max_mps,
                        acceleration: c.a_max_mps2,
                        jerk: c.j_max_mps3,
                        snap: Some(c.s_max_mps4),
                    },
                    ts,
                )
                .map_err(|e| invalid("reference.fourth_order", &e.to_string()))?,
                c.pad_before_samples,
                c.total_samples,
            ),
            ReferenceConfig::ThirdOrder(c) => (
                third_order_profile(
                    c.displacement_m,
                    &MotionLimits {
                        velocity: c.v_max_mps,
                        acceleration: c.a_max_mps2,
                        jerk: c.j_max_mps3,
                        snap: None,
                    },
                    ts,
                )
                .map_err(|e| invalid("reference.third_order", &e.to_string()))?,
                c.pad_before_samples,
                c.total_samples,
            ),
        };
        let record = profile
            .position()
            .pad_to_total(pad, total)
            .map_err(|e| invalid("reference", &e.to_string()))?;
        Ok((profile, record))
    }

    /// Builds the learning filter for the configured design model.
    pub fn build_learning_filter(
        &self,
        scenario: &Scenario,
        ilc: &IlcConfig,
    ) -> Result<InverseDesign, ConfigError> {
        let ts = self.scenario.ts_s;
        let model = match (&ilc.learning_model, &self.scenario.plant) {
            (LearningModelConfig::Exact, _) => {
                return designs::exact_inverse_filter(scenario, ilc.preview_samples)
                    .map_err(|e| invalid("ilc.learning_model", &e.to_string()));
            }
            (LearningModelConfig::Rigid, PlantConfig::Modal(m)) => ContinuousModal::new(
                m.mass_kg,
                vec![],
            ),
            (LearningModelConfig::Accurate, PlantConfig::Modal(m)) => modal_from_config(m)
                .and_then(|truth| {
                    ContinuousModal::new(
                        truth.mass(),
                        truth
                            .modes()
                            .iter()
                            .map(|mode| Mode {
                                residue: mode.residue,
                                damping: mode.damping
                                    * ilcbench_core::plant::printer::MODEL_DAMPING_FACTOR,
                                natural_frequency: mode.natural_frequency
                                    * ilcbench_core::plant::printer::MODEL_FREQ_FACTOR,
                            })
                            .collect(),
                    )
                }),
            (LearningModelConfig::Modal(m), _) => modal_from_config(m),
            (_, PlantConfig::Rational { .. }) => {
                return Err(invalid(
                    "ilc.learning_model",
                    "rigid/accurate models need a modal plant description",
                ));
            }
        }
        .map_err(|e| invalid("ilc.learning_model", &e.to_string()))?;
        designs::learning_filter_from_model(
            &model,
            scenario.controller(),
            ts,
            ilc.preview_samples,
        )
        .map_err(|e| invalid("ilc.learning_model", &e.to_string()))
    }

    /// Frequency mask in rad/s.
    pub fn build_mask(&self) -> FrequencyMask {
        match &self.mask {
            None => FrequencyMask::all(),
            Some(m) => {
                let lo = m.min_hz.unwrap_or(0.0) * 2.0 * std::f64::consts::PI;
                let hi = m
                    .max_hz
                    .map(|h| h * 2.0 * std::f64::consts::PI)
                    .unwrap_or(f64::INFINITY);
                FrequencyMask::band(lo, hi).unwrap_or_default()
            }
        }
    }

    pub fn build_basis_spec(ilc: &IlcConfig) -> Result<Option<BasisSpec>, ConfigError> {
        match &ilc.basis {
            None => Ok(None),
            Some(b) => BasisSpec::new(b.generators.clone())
                .map(Some)
                .map_err(|e| invalid("ilc.basis.generators", &e.to_string())),
        }
    }
}

fn modal_from_config(m: &ModalPlantConfig) -> ilcbench_core::CoreResult<ContinuousModal> {
    ContinuousModal::new(
        m.mass_kg,
        m.modes
            .iter()
            .map(|mode| Mode {
                residue: mode.residue_per_kg,
                damping: mode.damping_ratio,
                natural_frequency: 2.0 * std::f64::consts::PI * mode.frequency_hz,
            })
            .collect(),
    )
}

fn invalid(field: &str, message: &str) -> ConfigError {
    ConfigError::Invalid(vec![Violation {
        field: field.to_string(),
        message: message.to_string(),
    }])
}
