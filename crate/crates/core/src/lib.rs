//! Colony-based self-simulating fault-tolerant Turing machine.
//!
//! A generalized Turing machine whose program groups tape cells into colonies,
//! each colony encoding one cell of the next simulation level with a
//! burst-error-correcting code. The library contains the tape/configuration
//! model, the ε-bounded noise model with its stratification combinatorics,
//! the block codes, the rule DSL with its self-simulation interpreter, the
//! machine program itself, read-only trace checkers (health, trajectory
//! properties, annotation, scale-up decoding), and an experiment harness with
//! deterministic replay.

pub mod analysis;
pub mod codes;
pub mod engine;
pub mod gmachine;
pub mod harness;
pub mod history;
pub mod interp;
pub mod noise;
pub mod params;
pub mod program;
pub mod rules;
pub mod tape;
