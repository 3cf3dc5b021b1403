//! Design and simulation toolkit for learning feedforward control of
//! repetitive motion tasks.
//!
//! The crate covers the full workflow on virtual mechatronic plants:
//!
//! - discrete-time signals, rational systems, simulation, and frequency
//!   responses ([`signal`], [`transfer`], [`modal`], [`frf`], [`lifted`]);
//! - point-to-point motion profiles with bounded derivatives
//!   ([`trajectory`]);
//! - a virtual printer-style servo loop with encoder quantization and
//!   stochastic plus repeating disturbances ([`plant`]);
//! - repeated-task error decomposition and the achievable-performance
//!   estimate it yields ([`repro`]);
//! - frequency-domain learning-filter and robustness-filter design,
//!   contraction certification against nonparametric frequency response
//!   functions, iteration execution, and asymptotic-error prediction
//!   ([`filter`], [`inversion`], [`robustness`], [`convergence`],
//!   [`learning`]);
//! - basis-function feedforward for task flexibility ([`basis`]) and
//!   multivariable certification plus simulation ([`mimo`]).
//!
//! With the default `parallel` feature, ensemble sweeps, frequency-grid
//! evaluation, and lifted matrix-vector products run on rayon; disabling
//! the feature selects the sequential fallbacks with identical results.

pub mod basis;
pub mod convergence;
pub mod designs;
pub mod error;
pub mod filter;
pub mod frf;
pub mod inversion;
pub mod learning;
pub mod lifted;
pub mod mimo;
pub mod modal;
pub mod plant;
mod poly;
pub mod repro;
pub mod robustness;
pub mod signal;
pub mod trajectory;
pub mod transfer;

pub use error::{CoreError, CoreResult};
pub use filter::NoncausalFilter;
pub use frf::{default_grid, FrequencyMask, Frf};
pub use lifted::LiftedOperator;
pub use modal::{ContinuousModal, Mode};
pub use plant::{Scenario, TaskResult};
pub use signal::Signal;
pub use trajectory::MotionProfile;
pub use transfer::{closed_loop_maps, TransferFunction};
