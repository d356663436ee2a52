//! Histories and the raw stepping contract.
//!
//! [`apply_transition`] implements the effect of one transition on a
//! configuration, including cell creation at the edge of the populated tape
//! and the replacement situation. [`HistoryTrace`] records per-step deltas
//! and validates the history constraints incrementally; the incremental check
//! equals a from-scratch re-check of the whole trace.

use crate::noise::NoiseSet;
use crate::tape::{CellSymbol, Configuration, FieldId, FieldValue, Symbol, TapeError};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HistoryError {
    #[error("speed-of-light violation at t={t}: |{h1} - {h0}| > 1")]
    HeadJump { t: u64, h0: i64, h1: i64 },
    #[error("locality violation at t={t}: write at {pos} outside head+[-2B,2B)")]
    WriteOutsideWindow { t: u64, pos: i64 },
    #[error("current cell-pair not on head at noise-free switch t={t}: cur0={cur0} h={h}")]
    CurCellOffHead { t: u64, cur0: i64, h: i64 },
    #[error("dwell period exceeds T={t_dwell} ending at t={t}")]
    DwellTooLong { t: u64, t_dwell: u64 },
    #[error("current cell-pair {cur0} outside clean window around head {h} at t={t}")]
    CurCellOutsideWindow { t: u64, cur0: i64, h: i64 },
    #[error("transition writes Vac or Bad through the non-fault path")]
    IllegalWrite,
    #[error("replacement requires a non-adjacent current pair")]
    ReplacementAdjacent,
    #[error("new-state output on the wrong side for direction {0}")]
    NewWrongSide(i8),
    #[error("current cell-pair undefined on the tape")]
    NoCurrentPair,
    #[error(transparent)]
    Tape(#[from] TapeError),
}

/// One transition output: the rewritten pair and the head direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub a: CellSymbol,
    pub b: CellSymbol,
    pub dir: i8,
}

/// Field-level change at one position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellDelta {
    Field {
        pos: i64,
        field: FieldId,
        old: FieldValue,
        new: FieldValue,
    },
    Created {
        pos: i64,
        sym: CellSymbol,
    },
    Erased {
        pos: i64,
        sym: CellSymbol,
    },
}

impl CellDelta {
    pub fn pos(&self) -> i64 {
        match self {
            CellDelta::Field { pos, .. } | CellDelta::Created { pos, .. } | CellDelta::Erased { pos, .. } => {
                *pos
            }
        }
    }
}

/// One step record: head after the step, pair after the step, fault flag, and
/// the tape deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRec {
    pub h: i64,
    pub cur: (i64, i64),
    pub fault: bool,
    pub writes: Vec<CellDelta>,
}

impl StepRec {
    pub fn is_switch(&self) -> bool {
        !self.writes.is_empty()
    }

    pub fn to_line(&self, t: u64) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{t} h={} cur={},{} f={}",
            self.h, self.cur.0, self.cur.1, self.fault as u8
        );
        for w in &self.writes {
            match w {
                CellDelta::Field { pos, field, new, .. } => {
                    let _ = write!(s, " {}@{}={}", field.name(), pos, fv_text(new));
                }
                CellDelta::Created { pos, .. } => {
                    let _ = write!(s, " +@{pos}");
                }
                CellDelta::Erased { pos, .. } => {
                    let _ = write!(s, " -@{pos}");
                }
            }
        }
        s
    }
}

fn fv_text(v: &FieldValue) -> String {
    match v {
        FieldValue::U => "*".into(),
        FieldValue::I(x) => x.to_string(),
        FieldValue::Info(x) => format!("i{x:x}"),
        FieldValue::Seg(s) => format!("s{}", s.len()),
        FieldValue::Pos(p) => format!("p{},{},{}", p.offset, p.side, p.state),
        FieldValue::Ctl(_) => "ctl".into(),
    }
}

/// Computes the field-level difference between two symbols at one position.
pub fn diff_symbols(pos: i64, old: &CellSymbol, new: &CellSymbol) -> Vec<CellDelta> {
    let mut out = Vec::new();
    let mut fields: Vec<FieldId> = vec![
        FieldId::KindF,
        FieldId::InfoF,
        FieldId::Addr,
        FieldId::Age,
        FieldId::Sweep,
        FieldId::Drift,
        FieldId::Pass,
        FieldId::Replace,
        FieldId::BigDigression,
        FieldId::FrontAddr,
        FieldId::PayloadTape,
        FieldId::PayloadPosF,
        FieldId::RebuildSweep,
        FieldId::RebuildAddr,
        FieldId::RebuildHalf,
        FieldId::RebuildBase,
        FieldId::RebuildR1,
        FieldId::RebuildR2,
        FieldId::WorkMode,
        FieldId::Index,
        FieldId::Output,
        FieldId::ProcF,
    ];
    for j in 0..3 {
        fields.push(FieldId::HoldInfo(j));
        fields.push(FieldId::HoldDrift(j));
        fields.push(FieldId::HoldReplace(j));
        fields.push(FieldId::Compliant(j));
    }
    for i in 0..6 {
        fields.push(FieldId::WorkReg(i));
    }
    let ntoks = old.work.toks.len().max(new.work.toks.len());
    for i in 0..ntoks {
        fields.push(FieldId::WorkTok(i as u16));
    }
    for f in fields {
        let o = old.get(f);
        let n = new.get(f);
        if o != n {
            out.push(CellDelta::Field {
                pos,
                field: f,
                old: o,
                new: n,
            });
        }
    }
    out
}

/// Applies one transition to the configuration per the generalized stepping
/// contract. `fault` marks an override action (still restricted to legal
/// symbols). Returns the deltas applied.
pub fn apply_transition(
    cfg: &mut Configuration,
    action: &Action,
    fault: bool,
) -> Result<Vec<CellDelta>, HistoryError> {
    let b = cfg.tape.b;
    let (x, y) = cfg.cur;
    if cfg.tape.get_cell(x).is_none() || cfg.tape.get_cell(y).is_none() {
        return Err(HistoryError::NoCurrentPair);
    }
    let adjacent = y == x + b;
    let d = action.dir;
    if d != 1 && d != -1 {
        return Err(HistoryError::IllegalWrite);
    }
    // Vac/Bad are not representable as CellSymbol, so the non-fault path can
    // only violate the contract via an illegal New placement.
    // A "New write" means the transition turns a non-New cell into New;
    // leaving an already-New neighbor untouched is an ordinary write.
    let a_new = action.a.is_new() && !cfg.tape.get_cell(x).map(|c| c.is_new()).unwrap_or(false);
    let b_new = action.b.is_new() && !cfg.tape.get_cell(y).map(|c| c.is_new()).unwrap_or(false);
    if a_new || b_new {
        if adjacent && !fault {
            return Err(HistoryError::ReplacementAdjacent);
        }
        if ((a_new && d != -1) || (b_new && d != 1)) && !fault {
            return Err(HistoryError::NewWrongSide(d));
        }
    }

    let mut deltas = Vec::new();
    let write_sym = |tape: &mut crate::tape::Tape, pos: i64, new_sym: &CellSymbol| {
        let old = tape.get_cell(pos).cloned().expect("cell exists");
        let ds = diff_symbols(pos, &old, new_sym);
        if !ds.is_empty() {
            *tape.get_cell_mut(pos).unwrap() = new_sym.clone();
        }
        ds
    };

    if d == 1 {
        deltas.extend(write_sym(&mut cfg.tape, x, &action.a));
        if !b_new {
            deltas.extend(write_sym(&mut cfg.tape, y, &action.b));
            let z = match cfg.tape.right_neighbor(y) {
                Some(z) => z,
                None => {
                    let z = y + b;
                    let mut sym = CellSymbol::new_state(0);
                    // Fresh edge cells point back toward the populated tape.
                    sym.drift = -1;
                    cfg.tape.set(z, Symbol::Cell(sym.clone()))?;
                    deltas.push(CellDelta::Created { pos: z, sym });
                    z
                }
            };
            cfg.cur = (y, z);
        } else {
            // Replacement: erase y, create the new cell adjacent to x. The
            // new cell inherits the Pass value of the replaced cell.
            let old_y = cfg.tape.get_cell(y).cloned().unwrap();
            cfg.tape.remove(y);
            deltas.push(CellDelta::Erased { pos: y, sym: old_y.clone() });
            let mut fresh = action.b.clone();
            fresh.pass = old_y.pass;
            let yp = x + b;
            cfg.tape.set(yp, Symbol::Cell(fresh.clone()))?;
            deltas.push(CellDelta::Created { pos: yp, sym: fresh });
            cfg.cur = (x, yp);
        }
    } else {
        deltas.extend(write_sym(&mut cfg.tape, y, &action.b));
        if !a_new {
            deltas.extend(write_sym(&mut cfg.tape, x, &action.a));
            let w = match cfg.tape.left_neighbor(x) {
                Some(w) => w,
                None => {
                    let w = x - b;
                    let mut sym = CellSymbol::new_state(0);
                    sym.drift = 1;
                    cfg.tape.set(w, Symbol::Cell(sym.clone()))?;
                    deltas.push(CellDelta::Created { pos: w, sym });
                    w
                }
            };
            cfg.cur = (w, x);
        } else {
            let old_x = cfg.tape.get_cell(x).cloned().unwrap();
            cfg.tape.remove(x);
            deltas.push(CellDelta::Erased { pos: x, sym: old_x.clone() });
            let mut fresh = action.a.clone();
            fresh.pass = old_x.pass;
            let xp = y - b;
            cfg.tape.set(xp, Symbol::Cell(fresh.clone()))?;
            deltas.push(CellDelta::Created { pos: xp, sym: fresh });
            cfg.cur = (xp, y);
        }
    }
    // The head rides the left element of the current pair; in a replacement
    // situation it stays anchored while the pair is rebuilt around it.
    cfg.pos = cfg.cur.0;
    Ok(deltas)
}

/// Time-indexed record of a run plus its noise set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryTrace {
    pub initial: Configuration,
    pub steps: Vec<StepRec>,
    pub noise: NoiseSet,
    pub b: i64,
    pub t_dwell: u64,
    /// When set, only the most recent `keep` step records are retained
    /// (validation still covers every step).
    pub keep: Option<usize>,
    dropped: u64,
    last_switch: u64,
    last_h: i64,
}

impl HistoryTrace {
    pub fn new(initial: Configuration, t_dwell: u64) -> HistoryTrace {
        let b = initial.tape.b;
        let last_h = initial.pos;
        HistoryTrace {
            initial,
            steps: Vec::new(),
            noise: NoiseSet::new(),
            b,
            t_dwell,
            keep: None,
            dropped: 0,
            last_switch: 0,
            last_h,
        }
    }

    pub fn windowed(initial: Configuration, t_dwell: u64, keep: usize) -> HistoryTrace {
        let mut t = HistoryTrace::new(initial, t_dwell);
        t.keep = Some(keep);
        t
    }

    /// Steps recorded so far (including dropped ones).
    pub fn len(&self) -> u64 {
        self.dropped + self.steps.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Validates and appends one step record. `clean_window` reports whether
    /// the tape around the head (h ± 4B) is clean after the step.
    pub fn record_step(&mut self, rec: StepRec, clean_window: bool) -> Result<(), HistoryError> {
        let t = self.len() + 1;
        let h0 = self.last_h;
        if (rec.h - h0).abs() > 1 {
            return Err(HistoryError::HeadJump { t, h0, h1: rec.h });
        }
        for w in &rec.writes {
            let pos = w.pos();
            // Changes are confined to h + [-2B, 2B) around the head position
            // at either end of the step.
            let within = |h: i64| pos >= h - 2 * self.b && pos < h + 2 * self.b;
            if !within(h0) && !within(rec.h) {
                return Err(HistoryError::WriteOutsideWindow { t, pos });
            }
        }
        if rec.is_switch() {
            if !rec.fault && rec.cur.0 != rec.h {
                return Err(HistoryError::CurCellOffHead {
                    t,
                    cur0: rec.cur.0,
                    h: rec.h,
                });
            }
            self.last_switch = t;
        } else {
            let dwell = t - self.last_switch;
            if dwell > self.t_dwell {
                return Err(HistoryError::DwellTooLong {
                    t,
                    t_dwell: self.t_dwell,
                });
            }
        }
        if clean_window {
            let lo = rec.h - 4 * self.b;
            let hi = rec.h + 4 * self.b;
            if rec.cur.0 < lo || rec.cur.0 >= hi || rec.cur.1 < lo || rec.cur.1 >= hi {
                return Err(HistoryError::CurCellOutsideWindow {
                    t,
                    cur0: rec.cur.0,
                    h: rec.h,
                });
            }
        }
        if rec.fault {
            self.noise.insert((rec.h, t as i64));
        }
        self.last_h = rec.h;
        self.steps.push(rec);
        if let Some(keep) = self.keep {
            if self.steps.len() > keep {
                let excess = self.steps.len() - keep;
                self.steps.drain(..excess);
                self.dropped += excess as u64;
            }
        }
        Ok(())
    }

    pub fn head_at(&self, t: u64) -> Option<i64> {
        if t == 0 {
            return Some(self.initial.pos);
        }
        let idx = t.checked_sub(self.dropped + 1)? as usize;
        self.steps.get(idx).map(|r| r.h)
    }

    /// Line-delimited trace text, one record per step.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "ftm-trace v1 b={} t_dwell={} steps={}",
            self.b,
            self.t_dwell,
            self.len()
        );
        for (i, rec) in self.steps.iter().enumerate() {
            let _ = writeln!(out, "{}", rec.to_line(self.dropped + 1 + i as u64));
        }
        out
    }
}

/// Replays a trace's deltas forward from the initial configuration, yielding
/// the configuration after each step to a visitor.
pub struct Replayer {
    pub config: Configuration,
    pub t: u64,
}

impl Replayer {
    pub fn new(trace: &HistoryTrace) -> Replayer {
        Replayer {
            config: trace.initial.clone(),
            t: 0,
        }
    }

    /// Applies step `rec`; the record must be the one at time `self.t + 1`.
    pub fn apply(&mut self, rec: &StepRec) -> Result<(), HistoryError> {
        for w in &rec.writes {
            match w {
                CellDelta::Field { pos, field, new, .. } => {
                    let cell = self
                        .config
                        .tape
                        .get_cell_mut(*pos)
                        .ok_or(HistoryError::NoCurrentPair)?;
                    cell.set(*field, new.clone())?;
                }
                CellDelta::Created { pos, sym } => {
                    self.config.tape.set(*pos, Symbol::Cell(sym.clone()))?;
                }
                CellDelta::Erased { pos, .. } => {
                    self.config.tape.remove(*pos);
                }
            }
        }
        self.config.pos = rec.h;
        self.config.cur = rec.cur;
        self.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::{Kind, Tape};

    fn two_cell_config() -> Configuration {
        let mut t = Tape::new(1);
        let mut a = CellSymbol::blank(Kind::Member0);
        a.addr = 0;
        let mut b = CellSymbol::blank(Kind::Member0);
        b.addr = 1;
        t.set(0, Symbol::Cell(a)).unwrap();
        t.set(1, Symbol::Cell(b)).unwrap();
        Configuration::new(t, 0, (0, 1))
    }

    #[test]
    fn plain_right_step_shifts_pair_and_creates_neighbor() {
        let mut cfg = two_cell_config();
        let mut a2 = cfg.tape.get_cell(0).unwrap().clone();
        a2.age = 1;
        let b2 = cfg.tape.get_cell(1).unwrap().clone();
        let action = Action { a: a2, b: b2, dir: 1 };
        let deltas = apply_transition(&mut cfg, &action, false).unwrap();
        assert_eq!(cfg.pos, 1);
        assert_eq!(cfg.cur, (1, 2));
        assert!(cfg.tape.get_cell(2).unwrap().is_new());
        assert!(deltas.iter().any(|d| matches!(d, CellDelta::Created { pos: 2, .. })));
    }

    #[test]
    fn replacement_inherits_pass_and_anchors_pair() {
        // Non-adjacent pair (0, 3); action writes new_1 to the right.
        let mut t = Tape::new(1);
        let a = CellSymbol::blank(Kind::Member0);
        let mut far = CellSymbol::blank(Kind::Stem);
        far.pass = 1;
        t.set(0, Symbol::Cell(a.clone())).unwrap();
        t.set(3, Symbol::Cell(far)).unwrap();
        let mut cfg = Configuration::new(t, 0, (0, 3));
        let action = Action {
            a: a.clone(),
            b: CellSymbol::new_state(1),
            dir: 1,
        };
        apply_transition(&mut cfg, &action, false).unwrap();
        assert!(cfg.tape.is_vac(3), "old right cell erased");
        let fresh = cfg.tape.get_cell(1).expect("fresh adjacent cell");
        assert!(fresh.is_new());
        assert_eq!(fresh.pass, 1, "Pass inherited from replaced cell");
        assert_eq!(cfg.cur, (0, 1), "pair stays anchored at x");
    }

    #[test]
    fn replacement_rejected_when_adjacent() {
        let mut cfg = two_cell_config();
        let a = cfg.tape.get_cell(0).unwrap().clone();
        let action = Action {
            a,
            b: CellSymbol::new_state(0),
            dir: 1,
        };
        assert_eq!(
            apply_transition(&mut cfg, &action, false).unwrap_err(),
            HistoryError::ReplacementAdjacent
        );
    }

    #[test]
    fn new_state_on_wrong_side_rejected() {
        let mut t = Tape::new(1);
        t.set(0, Symbol::Cell(CellSymbol::blank(Kind::Stem))).unwrap();
        t.set(3, Symbol::Cell(CellSymbol::blank(Kind::Stem))).unwrap();
        let mut cfg = Configuration::new(t, 0, (0, 3));
        let action = Action {
            a: CellSymbol::new_state(0),
            b: CellSymbol::blank(Kind::Stem),
            dir: 1, // a' ∈ New requires d = −1
        };
        assert_eq!(
            apply_transition(&mut cfg, &action, false).unwrap_err(),
            HistoryError::NewWrongSide(1)
        );
    }

    #[test]
    fn mirror_left_step() {
        let mut t = Tape::new(1);
        t.set(0, Symbol::Cell(CellSymbol::blank(Kind::Member0))).unwrap();
        t.set(1, Symbol::Cell(CellSymbol::blank(Kind::Member1))).unwrap();
        let mut cfg = Configuration::new(t, 0, (0, 1));
        let a = cfg.tape.get_cell(0).unwrap().clone();
        let b = cfg.tape.get_cell(1).unwrap().clone();
        let action = Action { a, b, dir: -1 };
        apply_transition(&mut cfg, &action, false).unwrap();
        assert_eq!(cfg.pos, -1);
        assert_eq!(cfg.cur, (-1, 0));
        assert!(cfg.tape.get_cell(-1).unwrap().is_new());
    }

    #[test]
    fn record_step_accepts_move_only() {
        let cfg = two_cell_config();
        let mut trace = HistoryTrace::new(cfg, 8);
        let rec = StepRec {
            h: 1,
            cur: (0, 1),
            fault: false,
            writes: vec![],
        };
        trace.record_step(rec, true).unwrap();
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn record_step_rejects_locality_violation() {
        let cfg = two_cell_config();
        let mut trace = HistoryTrace::new(cfg, 8);
        let rec = StepRec {
            h: 0,
            cur: (0, 1),
            fault: false,
            writes: vec![CellDelta::Field {
                pos: 3,
                field: FieldId::Age,
                old: FieldValue::I(0),
                new: FieldValue::I(1),
            }],
        };
        assert!(matches!(
            trace.record_step(rec, true),
            Err(HistoryError::WriteOutsideWindow { pos: 3, .. })
        ));
    }

    #[test]
    fn record_step_rejects_head_jump() {
        let cfg = two_cell_config();
        let mut trace = HistoryTrace::new(cfg, 8);
        let rec = StepRec {
            h: 2,
            cur: (2, 3),
            fault: false,
            writes: vec![],
        };
        assert!(matches!(
            trace.record_step(rec, true),
            Err(HistoryError::HeadJump { .. })
        ));
    }

    #[test]
    fn record_step_enforces_dwell_bound() {
        let cfg = two_cell_config();
        let mut trace = HistoryTrace::new(cfg, 3);
        for i in 0..3u64 {
            let rec = StepRec {
                h: (i as i64 % 2),
                cur: (0, 1),
                fault: false,
                writes: vec![],
            };
            trace.record_step(rec, true).unwrap();
        }
        let rec = StepRec {
            h: 1,
            cur: (0, 1),
            fault: false,
            writes: vec![],
        };
        assert!(matches!(
            trace.record_step(rec, true),
            Err(HistoryError::DwellTooLong { .. })
        ));
    }

    #[test]
    fn incremental_equals_full_recheck() {
        // Build a small legal trace, then re-validate it from scratch.
        let cfg = two_cell_config();
        let mut trace = HistoryTrace::new(cfg.clone(), 8);
        let mut h = 0i64;
        for i in 0..20u64 {
            let dir = if i % 4 < 2 { 1 } else { -1 };
            h += dir;
            let writes = if i % 3 == 0 {
                vec![CellDelta::Field {
                    pos: h,
                    field: FieldId::Age,
                    old: FieldValue::I(0),
                    new: FieldValue::I(i as i64),
                }]
            } else {
                vec![]
            };
            let rec = StepRec {
                h,
                cur: if writes.is_empty() { trace.steps.last().map(|r| r.cur).unwrap_or((0, 1)) } else { (h, h + 1) },
                fault: false,
                writes,
            };
            trace.record_step(rec, false).unwrap();
        }
        let mut fresh = HistoryTrace::new(cfg, 8);
        for rec in trace.steps.clone() {
            fresh.record_step(rec, false).unwrap();
        }
        assert_eq!(fresh.len(), trace.len());
    }
}
