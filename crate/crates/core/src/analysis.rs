//! Read-only verdicts over frozen traces and configurations.
pub mod placeholder {}
