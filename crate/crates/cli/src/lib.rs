//! Batch scenario execution for learning feedforward experiments:
//! parse JSON configs describing plants, references, and learning
//! designs; run them; emit machine-readable results and plot-ready data.

pub mod config;
pub mod experiment;
pub mod output;
