//! The simulation engine: drives one machine over one configuration,
//! applying the transition function or a fault override at each step,
//! recording the history, and stopping on output, budget, or error.

use crate::gmachine::unary_input_tape;
use crate::history::{apply_transition, Action, HistoryTrace, StepRec};
use crate::program::MachineProgram;
use crate::rules::{self, RuleError};
use crate::tape::{CellSymbol, Configuration, Kind, PayloadPos, Proc, Symbol, Tape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("rule evaluation failed at t={t}: {source}")]
    Rule { t: u64, source: RuleError },
    #[error("history violation at t={t}: {source}")]
    History {
        t: u64,
        source: crate::history::HistoryError,
    },
    #[error("input of length {0} does not fit the booting pair at any executable level")]
    InputTooLarge(usize),
    #[error(transparent)]
    Code(#[from] crate::codes::CodeError),
    #[error(transparent)]
    Tape(#[from] crate::tape::TapeError),
}

/// Noise plan for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FaultPlan {
    None,
    /// Independent per-step faults with probability eps; actions drawn
    /// uniformly from the legal action space under the run's seed.
    Iid { eps: f64 },
    /// Scripted fault steps (times are 1-based step indices); actions drawn
    /// from the seeded generator unless an explicit override is given.
    Scripted(Vec<ScriptedFault>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedFault {
    pub t: u64,
    /// Explicit action override; None draws a seeded-random legal action.
    pub action: Option<Box<Action>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    OutputProduced,
    BudgetExhausted,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub max_steps: u64,
    pub stop_on_output: bool,
    pub seed: u64,
    pub faults: FaultPlan,
    /// Keep only this many most recent step records (None keeps all).
    pub trace_keep: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_steps: 2_000_000,
            stop_on_output: true,
            seed: 0,
            faults: FaultPlan::None,
            trace_keep: None,
        }
    }
}

/// Per-step observer for streaming checkers.
pub trait StepObserver {
    fn on_step(&mut self, t: u64, rec: &StepRec, config: &Configuration);
}

#[derive(Debug)]
pub struct RunResult {
    pub trace: HistoryTrace,
    pub config: Configuration,
    pub steps: u64,
    pub stopped: StopReason,
    pub output: Option<u16>,
    pub faults_applied: u64,
    pub alarms: u64,
    pub wpb_total: u64,
    pub fired: BTreeMap<String, u64>,
}

/// Builds a level-1 booting pair carrying G's input 1^n: marker at G cell 0,
/// ones following, G head on the first one. The pair sits at positions
/// (−B, 0) with addresses (Q−1, 0).
pub fn boot_config_level1(mp: &MachineProgram, n: usize) -> Result<Configuration, EngineError> {
    let p = &mp.params;
    let ppc = p.payload_per_cell as usize;
    let g_tape = unary_input_tape(n);
    if g_tape.len() + 1 > 2 * ppc {
        return Err(EngineError::InputTooLarge(n));
    }
    let mut left = CellSymbol::blank(Kind::Booting);
    left.addr = p.q as i64 - 1;
    left.proc_ind = Some(Proc::Boot);
    left.drift = 1;
    // Position −B covers G cells [−P, 0): blank.
    left.payload.tape = vec![None; ppc];
    let mut right = CellSymbol::blank(Kind::Booting);
    right.addr = 0;
    right.proc_ind = Some(Proc::Boot);
    right.drift = -1;
    let mut seg = vec![None; ppc];
    for (i, s) in g_tape.iter().enumerate().take(ppc) {
        seg[i] = *s;
    }
    right.payload.tape = seg;
    right.payload.pos = Some(PayloadPos {
        offset: 1,
        side: 1,
        state: 0,
    });
    let mut t = Tape::new(p.b);
    t.set(-p.b, Symbol::Cell(left))?;
    t.set(0, Symbol::Cell(right))?;
    Ok(Configuration::new(t, -p.b, (-p.b, 0)))
}

/// Builds the level-2 start: a booting pair of the simulated machine holding
/// the input, φ-encoded into two colonies.
pub fn boot_config_level2(mp: &MachineProgram, n: usize) -> Result<Configuration, EngineError> {
    let p = &mp.params;
    let q = p.q as i64;
    let b2 = p.b * q;
    let win = (p.payload_per_cell as i64 * q) as usize;
    let g_tape = unary_input_tape(n);
    if g_tape.len() + 1 > win {
        return Err(EngineError::InputTooLarge(n));
    }
    let mut left = CellSymbol::blank(Kind::Booting);
    left.addr = q - 1;
    left.proc_ind = Some(Proc::Boot);
    left.drift = 1;
    left.payload.tape = vec![None; win];
    let mut right = CellSymbol::blank(Kind::Booting);
    right.addr = 0;
    right.proc_ind = Some(Proc::Boot);
    right.drift = -1;
    let mut seg = vec![None; win];
    for (i, s) in g_tape.iter().enumerate() {
        seg[i] = *s;
    }
    right.payload.tape = seg;
    right.payload.pos = Some(PayloadPos {
        offset: 1,
        side: 1,
        state: 0,
    });
    let mut src_tape = Tape::new(b2);
    src_tape.set(-b2, Symbol::Cell(left))?;
    src_tape.set(0, Symbol::Cell(right))?;
    let src = Configuration::new(src_tape, 0, (-b2, 0));
    let enc = crate::codes::phi_encode(&src, &mp.psi, p)?;
    Ok(enc)
}

/// Chooses the starting level per the input-encoding policy: the smallest
/// level whose booting-pair payload capacity holds the input.
pub fn initial_config(mp: &MachineProgram, n: usize) -> Result<(u32, Configuration), EngineError> {
    let ppc = mp.params.payload_per_cell as usize;
    if unary_input_tape(n).len() + 1 <= 2 * ppc {
        Ok((1, boot_config_level1(mp, n)?))
    } else if unary_input_tape(n).len() + 1 <= 2 * ppc * mp.params.q as usize {
        Ok((2, boot_config_level2(mp, n)?))
    } else {
        Err(EngineError::InputTooLarge(n))
    }
}

fn random_legal_action(rng: &mut ChaCha8Rng, x: &CellSymbol, y: &CellSymbol) -> Action {
    let mut a = x.clone();
    let mut b = y.clone();
    let n_mut = rng.gen_range(1..=4);
    for _ in 0..n_mut {
        let side = rng.gen_bool(0.5);
        let c = if side { &mut a } else { &mut b };
        match rng.gen_range(0..12) {
            0 => c.addr = rng.gen_range(0..64),
            1 => c.age = rng.gen_range(0..256),
            2 => c.sweep = rng.gen_range(0..64),
            3 => {
                c.kind = Kind::from_code(rng.gen_range(0..7)).unwrap();
            }
            4 => c.drift = if rng.gen_bool(0.5) { 1 } else { -1 },
            5 => c.pass = rng.gen_range(-1..=1),
            6 => c.info = if rng.gen_bool(0.3) { None } else { Some(rng.gen()) },
            7 => {
                c.big_digression = if rng.gen_bool(0.5) {
                    None
                } else {
                    Some(rng.gen_range(-1..=16))
                }
            }
            8 => c.index = if rng.gen_bool(0.5) { None } else { Some(rng.gen_range(0..4096)) },
            9 => {
                c.work.mode = if rng.gen_bool(0.5) {
                    None
                } else {
                    Some(rng.gen_range(0..16384))
                }
            }
            10 => c.output = if rng.gen_bool(0.8) { None } else { Some(rng.gen()) },
            _ => {
                c.replace = if rng.gen_bool(0.5) { None } else { Some(rng.gen_range(0..2)) };
            }
        }
    }
    // Avoid accidental New-kind writes that the creation discipline reserves.
    if a.kind == Kind::New {
        a.kind = Kind::Stem;
    }
    if b.kind == Kind::New {
        b.kind = Kind::Stem;
    }
    Action {
        a,
        b,
        dir: if rng.gen_bool(0.5) { 1 } else { -1 },
    }
}

/// Runs the machine at level 1 from `config`.
pub fn run(
    mp: &MachineProgram,
    config: Configuration,
    opts: &RunOptions,
    mut observers: Option<&mut dyn StepObserver>,
) -> Result<RunResult, EngineError> {
    let env = mp.env(1);
    let mut cfg = config;
    // Anchor the head on the left element of the current pair.
    cfg.pos = cfg.cur.0;
    let t_dwell = mp.params.t_dwell;
    let mut trace = match opts.trace_keep {
        Some(k) => HistoryTrace::windowed(cfg.clone(), t_dwell, k),
        None => HistoryTrace::new(cfg.clone(), t_dwell),
    };
    let mut fault_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_fa17);
    let mut iid_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x1d1d_0000);
    let scripted: BTreeMap<u64, Option<Box<Action>>> = match &opts.faults {
        FaultPlan::Scripted(v) => v.iter().map(|s| (s.t, s.action.clone())).collect(),
        _ => BTreeMap::new(),
    };

    let mut alarms = 0u64;
    let mut faults_applied = 0u64;
    let mut wpb_total = 0u64;
    let mut fired: BTreeMap<String, u64> = BTreeMap::new();
    let mut stopped = StopReason::BudgetExhausted;
    let mut output = None;
    let mut steps = 0u64;

    for t in 1..=opts.max_steps {
        let (cx, cy) = cfg.cur;
        let x = cfg
            .tape
            .get_cell(cx)
            .cloned()
            .ok_or(EngineError::History {
                t,
                source: crate::history::HistoryError::NoCurrentPair,
            })?;
        let y = cfg
            .tape
            .get_cell(cy)
            .cloned()
            .ok_or(EngineError::History {
                t,
                source: crate::history::HistoryError::NoCurrentPair,
            })?;
        let alpha = cy - cx == cfg.tape.b;

        let fault_now = match &opts.faults {
            FaultPlan::None => false,
            FaultPlan::Iid { eps } => iid_rng.gen_bool(*eps),
            FaultPlan::Scripted(_) => scripted.contains_key(&t),
        };

        let (action, fault) = if fault_now {
            faults_applied += 1;
            let act = match scripted.get(&t) {
                Some(Some(a)) => (**a).clone(),
                _ => random_legal_action(&mut fault_rng, &x, &y),
            };
            (act, true)
        } else {
            let out = rules::eval(&mp.prog, &env, (&x, &y), alpha)
                .map_err(|source| EngineError::Rule { t, source })?;
            wpb_total += out.wpb_calls as u64;
            *fired.entry(out.fired.clone()).or_insert(0) += 1;
            if out.a.proc_ind == Some(Proc::Heal) && x.proc_ind != Some(Proc::Heal) {
                alarms += 1;
            }
            (
                Action {
                    a: out.a,
                    b: out.b,
                    dir: out.dir,
                },
                false,
            )
        };

        let writes = apply_transition(&mut cfg, &action, fault)
            .map_err(|source| EngineError::History { t, source })?;
        let rec = StepRec {
            h: cfg.pos,
            cur: cfg.cur,
            fault,
            writes,
        };
        let clean = cfg
            .tape
            .is_clean_interval(cfg.pos - 4 * cfg.tape.b, cfg.pos + 4 * cfg.tape.b);
        trace
            .record_step(rec, clean)
            .map_err(|source| EngineError::History { t, source })?;
        if let Some(obs) = observers.as_deref_mut() {
            obs.on_step(t, trace.steps.last().unwrap(), &cfg);
        }
        steps = t;

        if opts.stop_on_output {
            if let Some(c) = cfg.tape.get_cell(0) {
                if let Some(v) = c.output {
                    output = Some(v);
                    stopped = StopReason::OutputProduced;
                    break;
                }
            }
        }
    }

    Ok(RunResult {
        trace,
        config: cfg,
        steps,
        stopped,
        output,
        faults_applied,
        alarms,
        wpb_total,
        fired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmachine::{oracle_first_output, GMachine};
    use crate::params::ParamSet;

    fn toy_machine() -> MachineProgram {
        crate::program::build(ParamSet::toy(), GMachine::incrementer())
    }

    #[test]
    fn boot_level1_produces_first_output() {
        let mp = toy_machine();
        let cfg = boot_config_level1(&mp, 1).unwrap();
        let opts = RunOptions {
            max_steps: 5000,
            ..Default::default()
        };
        let res = run(&mp, cfg, &opts, None).unwrap();
        assert_eq!(res.stopped, StopReason::OutputProduced, "fired: {:?}", res.fired);
        let g = GMachine::incrementer();
        let oracle = oracle_first_output(&g, &unary_input_tape(1), 1, 0, 1000).unwrap();
        assert_eq!(res.output, Some(oracle.value));
        assert_eq!(res.alarms, 0);
    }

    #[test]
    fn boot_run_is_deterministic() {
        let mp = toy_machine();
        let opts = RunOptions {
            max_steps: 5000,
            ..Default::default()
        };
        let r1 = run(&mp, boot_config_level1(&mp, 1).unwrap(), &opts, None).unwrap();
        let r2 = run(&mp, boot_config_level1(&mp, 1).unwrap(), &opts, None).unwrap();
        assert_eq!(r1.steps, r2.steps);
        assert_eq!(r1.trace.to_text(), r2.trace.to_text());
    }

    #[test]
    fn scripted_fault_flags_exactly_one_record() {
        let mp = toy_machine();
        let cfg = boot_config_level1(&mp, 2).unwrap();
        let opts = RunOptions {
            max_steps: 40,
            stop_on_output: false,
            seed: 7,
            faults: FaultPlan::Scripted(vec![ScriptedFault { t: 9, action: None }]),
            trace_keep: None,
        };
        let res = run(&mp, cfg, &opts, None).unwrap();
        let flagged: Vec<u64> = res
            .trace
            .steps
            .iter()
            .enumerate()
            .filter(|(_, r)| r.fault)
            .map(|(i, _)| i as u64 + 1)
            .collect();
        assert_eq!(flagged, vec![9]);
        assert_eq!(res.trace.noise.len(), 1);
    }
}
