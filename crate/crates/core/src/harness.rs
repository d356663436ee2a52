//! Experiment orchestration.
pub mod placeholder {}
