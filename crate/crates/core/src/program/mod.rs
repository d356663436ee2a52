//! The machine program: the fault-tolerant colony simulation expressed in
//! the rule DSL, produced by a builder and shipped as a serialized program
//! file. Submodules hold the boundary-legality catalog shared with the
//! health checker, the mode constants, and the rule emitters (motion,
//! booting, the simulation work period, transfer, healing, rebuilding).

pub mod build;
pub mod legality;
pub mod modes;
pub mod simulate;

use crate::codes::PsiCode;
use crate::gmachine::GMachine;
use crate::params::ParamSet;
use crate::rules::{RuleEnv, RuleProgram};

/// A built program together with its serialized token string and companions.
#[derive(Debug, Clone)]
pub struct MachineProgram {
    pub params: ParamSet,
    pub g: GMachine,
    pub psi: PsiCode,
    pub prog: RuleProgram,
    pub r_tokens: Vec<u16>,
    /// Number of sweeps in one simulation work period (the Age wraps here).
    pub n_sweeps: i64,
}

impl MachineProgram {
    pub fn env(&self, k: u32) -> RuleEnv<'_> {
        RuleEnv {
            k,
            params: &self.params,
            g: &self.g,
            r_tokens: &self.r_tokens,
            psi: &self.psi,
        }
    }
}

/// Builds the canonical program for a parameter profile and target machine.
pub fn build(params: ParamSet, g: GMachine) -> MachineProgram {
    build::build_program(params, g)
}
