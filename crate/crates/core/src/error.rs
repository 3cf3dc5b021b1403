//! Error type shared by all toolkit modules.

use thiserror::Error;

/// Errors produced by signal, system, design, and learning operations.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// A scalar or structural parameter violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two signals or systems with different sample times were combined.
    #[error("sample time mismatch: {left} s vs {right} s")]
    SampleTimeMismatch { left: f64, right: f64 },

    /// Two signals of different lengths were combined.
    #[error("signal length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A modal frequency is at or beyond the Nyquist rate for the
    /// requested sample time.
    #[error("mode at {omega} rad/s folds over Nyquist {nyquist} rad/s")]
    Aliasing { omega: f64, nyquist: f64 },

    /// A frequency grid point lies outside (0, pi/Ts].
    #[error("frequency {omega} rad/s outside (0, {nyquist}] rad/s")]
    FrequencyOutOfRange { omega: f64, nyquist: f64 },

    /// Closed-loop pole magnitudes at or outside the unit circle.
    #[error("unstable closed loop; pole magnitudes {magnitudes:?}")]
    UnstableClosedLoop { magnitudes: Vec<f64> },

    /// A recursion produced a non-finite sample.
    #[error("simulation overflow at sample {index}")]
    SimulationOverflow { index: usize },

    /// The model to invert has a zero on the unit circle, so no stable
    /// two-sided inverse exists. A zero at z = +1 typically indicates
    /// integral action inside the loop, which this designer does not
    /// support.
    #[error("model zero at {re}{im:+}j lies on the unit circle; no stable inverse")]
    InversionSingularity { re: f64, im: f64 },

    /// The preview budget cannot hold the anticausal tail of the inverse
    /// at the requested truncation tolerance.
    #[error("preview budget too small; {required} preview samples required")]
    PreviewBudget { required: usize },

    /// No low-pass cutoff satisfies the contraction condition on the mask.
    #[error("no robustness filter achieves contraction; worst frequency {worst_frequency} rad/s")]
    RobustnessInfeasible { worst_frequency: f64 },

    /// The frequency mask selects no grid points.
    #[error("frequency mask selects no grid points")]
    EmptyMask,

    /// The contraction condition fails, so the fixed-point formula does
    /// not apply.
    #[error("contraction fails (sup rho = {sup_rho}); fixed point undefined")]
    FixedPointUndefined { sup_rho: f64 },

    /// Matrix-valued operands have incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The regressor is rank deficient and no regularization was requested.
    #[error("singular parameter update; regressor is rank deficient")]
    SingularUpdate,
}

/// Convenience alias used throughout the crate.
pub type CoreResult<T> = Result<T, CoreError>;
