//! The rule DSL: nested conditionals over fields of the observed cell-pair,
//! elementary instructions (field assignment, head move), and the serialized
//! program string R.
//!
//! Rules are evaluated top-down; the first rule whose guard holds fires.
//! Conditions compare a field against a literal, a named parameter, or
//! another field, test adjacency, and combine with and/or/not. Assignment
//! right-hand sides may invoke a closed library of named operators, each a
//! fixed sub-machine reading only the observed pair (codec step, majority
//! vote, payload window step, interpreter step, legality probe). The literal
//! instruction WriteProgramBit performs Work ← R(Index); R is not quoted
//! inside itself.

use crate::codes::PsiCode;
use crate::gmachine::{run_window, GMachine};
use crate::params::ParamSet;
use crate::tape::{CellSymbol, FieldId, FieldValue, PayloadPos};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("no rule matched the observed pair")]
    NoRuleMatched,
    #[error("rule '{0}' did not set a head direction")]
    NoDirection(String),
    #[error("malformed program: {0}")]
    Parse(String),
    #[error("type error in rule '{rule}': {detail}")]
    TypeError { rule: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    X,
    Y,
}

/// Named parameters readable by conditions (the program is level-uniform;
/// the level k itself is one of them).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PName {
    K,
    Q,
    QMinus1,
    PadLen,
    IntEnd,
    Z,
    ZHalf,
    F,
    Delta,
    SmallStarve,
    BigStarve,
    Overshoot,
    PayloadPerCell,
    TokPerCell,
    RLen,
    MSyms,
    VaBase,
    ResBase,
    /// Q^{k−1}: G-steps bundled into one payload action at level k.
    PayloadBudget,
    /// Index (exclusive) of the last work-track cell.
    WorkEndCell,
    VaSymB,
    VaAlpha,
    VaCellA,
    VaCellB,
    ResCellA,
    ResCellB,
    ResDir,
    BigDigOmega,
    BigDigDeltaNeg,
    BigDigDeltaPos,
}

pub const TOKENS_PER_CELL: u32 = 1024;

pub fn param_value(p: PName, env: &RuleEnv) -> i64 {
    use crate::tape::{BIGDIG_DELTA_NEG, BIGDIG_DELTA_POS, BIGDIG_OMEGA};
    let ps = env.params;
    match p {
        PName::K => env.k as i64,
        PName::Q => ps.q as i64,
        PName::QMinus1 => ps.q as i64 - 1,
        PName::PadLen => ps.pad_len as i64,
        PName::IntEnd => (ps.q - ps.pad_len) as i64,
        PName::Z => ps.z as i64,
        PName::ZHalf => (ps.z / 2) as i64,
        PName::F => ps.f_big as i64,
        PName::Delta => ps.delta as i64,
        PName::SmallStarve => ps.small_turn_starvation as i64,
        PName::BigStarve => ps.big_turn_starvation as i64,
        PName::Overshoot => ps.overshoot_cells as i64,
        PName::PayloadPerCell => ps.payload_per_cell as i64,
        PName::TokPerCell => TOKENS_PER_CELL as i64,
        PName::RLen => env.r_tokens.len() as i64,
        PName::MSyms => env.psi.rep.msg_len as i64,
        PName::PayloadBudget => (env.params.q as i64).pow(env.k.saturating_sub(1)),
        PName::WorkEndCell => {
            let total = env.r_tokens.len() as i64
                + env.k as i64
                + 1
                + crate::interp::VA_TOKENS as i64
                + crate::interp::RES_TOKENS as i64;
            (total + TOKENS_PER_CELL as i64 - 1) / TOKENS_PER_CELL as i64
        }
        PName::VaBase => env.r_tokens.len() as i64 + env.k as i64 + 1,
        PName::VaSymB => param_value(PName::VaBase, env) + 16,
        PName::VaAlpha => param_value(PName::VaBase, env) + 32,
        PName::VaCellA => param_value(PName::VaBase, env) / TOKENS_PER_CELL as i64,
        PName::VaCellB => {
            (param_value(PName::VaBase, env) + crate::interp::VA_TOKENS as i64 - 1)
                / TOKENS_PER_CELL as i64
        }
        PName::ResCellA => param_value(PName::ResBase, env) / TOKENS_PER_CELL as i64,
        PName::ResCellB => {
            (param_value(PName::ResBase, env) + crate::interp::RES_TOKENS as i64 - 1)
                / TOKENS_PER_CELL as i64
        }
        PName::ResDir => param_value(PName::ResBase, env) + 32,
        PName::ResBase => {
            env.r_tokens.len() as i64 + env.k as i64 + 1 + crate::interp::VA_TOKENS as i64
        }
        PName::BigDigOmega => BIGDIG_OMEGA,
        PName::BigDigDeltaNeg => BIGDIG_DELTA_NEG,
        PName::BigDigDeltaPos => BIGDIG_DELTA_POS,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Lit(i64),
    Undef,
    Param(PName),
    Field(Side, FieldId),
    /// Token slot read with a computed slot index.
    Tok(Side, Box<Operand>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cond {
    Cmp(Expr, Cmp, Expr),
    Defined(Side, FieldId),
    Adjacent,
    All(Vec<Cond>),
    Any(Vec<Cond>),
    Not(Box<Cond>),
    /// Operator-backed predicate (legality probe and friends).
    Pred(OpCode, Side, Vec<Operand>),
}

/// The closed operator library. Every operator is a pure function of the
/// observed pair, its arguments, and the level parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpCode {
    /// Majority of Hold[1..3].Info of the side cell (undefined when tied).
    MajHoldInfo,
    MajHoldDrift,
    MajHoldReplace,
    /// Majority of Compliant[1..3] of the side cell as 0/1.
    MajCompliant,
    /// ψ codeword symbol this cell must hold for payload words (w0, w1).
    PsiSymAt,
    /// ψ codeword symbol for new_pass at this cell's address; args: [pass].
    PsiNewSymAt,
    /// Unpack packed words (w0, w1) and project: Output field.
    ExtractOutput,
    /// Project the G head position (window offset) from packed words.
    ExtractPosOffset,
    ExtractPosState,
    /// Payload slice [addr·P, (addr+1)·P) of the packed symbol's tape.
    ExtractPayloadSlice,
    /// One G window step family over the pair's payload segments;
    /// args: [budget]. Projections of one shared kernel run.
    GTapeAfter,
    GPosAfter,
    GEmitVal,
    GEmitSlot,
    GDirHint,
    GStuck,
    /// 1 when the window kernel emitted an output during this step.
    GEmitted,
    /// Number of G steps the kernel applied (0 when blocked).
    GSteps,
    /// A blank payload segment of this level's per-cell length.
    BlankSeg,
    /// Compliance accumulator over interior cells: packed
    /// (bursts, cover_end+1, matches0, matches1) updated with the covered
    /// cell's Info against candidate words; args [state, cand0, cand1].
    ComplyAcc,
    /// Verdict from the packed compliance state: 1 when the word is
    /// 2-compliant (majority intact, ≤2 bursts); args [state].
    ComplyOk,
    /// Compose a payload word from 8 token slots at an absolute base,
    /// reading whichever pair cells cover them; args [base].
    LoadWord,
    /// Replacement value carried by a result pair: the Pass of whichever new
    /// symbol is in New, else undefined; args [wa0, wa1, wb0, wb1, dirtok].
    ExtractReplace,
    /// Interpreter kernel projections; control travels in Work.R5.
    InterpCtl,
    InterpDir,
    InterpDone,
    /// Pair-local legality probe shared with the health checker.
    LegalPair,
    /// Core-field extrapolation from the other side's cell (stitching).
    ExtendCore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Operand(Operand),
    Add(Operand, Operand),
    Sub(Operand, Operand),
    Mul(Operand, Operand),
    Div(Operand, Operand),
    Mod(Operand, Operand),
    Op(OpCode, Side, Vec<Operand>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Instr {
    Assign(Side, FieldId, Expr),
    WriteTokAt(Side, Operand, Expr),
    /// Work ← R(Index): writes token R(Index) at slot (Index−1) mod W of the
    /// side-X cell, for 1-based Index. Out-of-range Index writes a blank and
    /// is logged by the evaluator.
    WriteProgramBit,
    /// Applies one interpreter kernel step: moves the control state in the
    /// direction of travel and commits the step's token writes (a bounded
    /// group of slot assignments on the observed pair).
    InterpCommit,
    /// Writes whole 8-token payload words at an absolute token base, confined
    /// to the addressed side's slots (bulk form of WriteTokAt).
    StoreWords(Side, Operand, Vec<Operand>),
    /// Writes every program token belonging to the side cell's stretch of
    /// the work track (slots addr·W .. addr·W+W−1 get R there, zeros beyond).
    WriteProgramCell(Side),
    /// Copies all six scratch registers between the pair cells.
    CarryRegs(Side, Side),
    /// Clears all six scratch registers of one cell.
    ClearRegs(Side),
    Move(Operand),
    Seq(Vec<Instr>),
    If(Cond, Box<Instr>, Box<Instr>),
    Nop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub guard: Cond,
    pub body: Instr,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RuleProgram {
    pub rules: Vec<Rule>,
}

/// Evaluation environment: level, parameters, target machine, the literal
/// program tokens (for WriteProgramBit), and the colony code.
pub struct RuleEnv<'a> {
    pub k: u32,
    pub params: &'a ParamSet,
    pub g: &'a GMachine,
    pub r_tokens: &'a [u16],
    pub psi: &'a PsiCode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOut {
    pub a: CellSymbol,
    pub b: CellSymbol,
    pub dir: i8,
    pub fired: String,
    /// Number of WriteProgramBit executions in this step.
    pub wpb_calls: u32,
    /// True when an out-of-range WriteProgramBit index was encountered.
    pub wpb_blank: bool,
}

struct EvalCtx<'a> {
    env: &'a RuleEnv<'a>,
    /// The observed pair: every read (conditions, expressions, operators)
    /// sees this snapshot, so a rule is a pure function of it.
    a0: CellSymbol,
    b0: CellSymbol,
    /// The output pair accumulating writes.
    a: CellSymbol,
    b: CellSymbol,
    alpha: bool,
    dir: Option<i8>,
    wpb_calls: u32,
    wpb_blank: bool,
}

impl<'a> EvalCtx<'a> {
    fn cell(&self, s: Side) -> &CellSymbol {
        match s {
            Side::X => &self.a0,
            Side::Y => &self.b0,
        }
    }

    fn cell_mut(&mut self, s: Side) -> &mut CellSymbol {
        match s {
            Side::X => &mut self.a,
            Side::Y => &mut self.b,
        }
    }

    fn operand(&self, o: &Operand) -> FieldValue {
        match o {
            Operand::Lit(v) => FieldValue::I(*v),
            Operand::Undef => FieldValue::U,
            Operand::Param(p) => FieldValue::I(param_value(*p, self.env)),
            Operand::Field(s, f) => self.cell(*s).get(*f),
            Operand::Tok(s, slot) => {
                // Absolute track index, clipped to the side cell's stretch.
                let idx = match self.operand(slot) {
                    FieldValue::I(v) if v >= 0 => v as u32,
                    _ => return FieldValue::U,
                };
                let cell = self.cell(*s);
                match crate::interp::cell_tok_base(cell, self.env.params.q as i64) {
                    Some(cbase) if idx >= cbase && idx < cbase + TOKENS_PER_CELL => {
                        FieldValue::I(
                            cell.work.toks.get((idx - cbase) as usize).copied().unwrap_or(0)
                                as i64,
                        )
                    }
                    _ => FieldValue::U,
                }
            }
        }
    }

    fn int(&self, o: &Operand) -> Option<i64> {
        self.operand(o).as_int()
    }

    fn cond(&self, c: &Cond) -> bool {
        match c {
            Cond::Cmp(l, op, r) => {
                let lv = self.expr(l);
                let rv = self.expr(r);
                match op {
                    Cmp::Eq => lv == rv,
                    Cmp::Ne => lv != rv,
                    _ => match (lv.as_int(), rv.as_int()) {
                        (Some(a), Some(b)) => match op {
                            Cmp::Lt => a < b,
                            Cmp::Le => a <= b,
                            Cmp::Gt => a > b,
                            Cmp::Ge => a >= b,
                            _ => unreachable!(),
                        },
                        _ => false,
                    },
                }
            }
            Cond::Defined(s, f) => self.cell(*s).get(*f).is_defined(),
            Cond::Adjacent => self.alpha,
            Cond::All(cs) => cs.iter().all(|c| self.cond(c)),
            Cond::Any(cs) => cs.iter().any(|c| self.cond(c)),
            Cond::Not(c) => !self.cond(c),
            Cond::Pred(op, side, args) => {
                matches!(self.op(*op, *side, args), FieldValue::I(v) if v != 0)
            }
        }
    }

    fn expr(&self, e: &Expr) -> FieldValue {
        match e {
            Expr::Operand(o) => self.operand(o),
            Expr::Add(a, b) => self.arith(a, b, |x, y| x.checked_add(y)),
            Expr::Sub(a, b) => self.arith(a, b, |x, y| x.checked_sub(y)),
            Expr::Mul(a, b) => self.arith(a, b, |x, y| x.checked_mul(y)),
            Expr::Div(a, b) => self.arith(a, b, |x, y| x.checked_div(y)),
            Expr::Mod(a, b) => self.arith(a, b, |x, y| x.checked_rem_euclid(y)),
            Expr::Op(op, side, args) => self.op(*op, *side, args),
        }
    }

    fn arith(&self, a: &Operand, b: &Operand, f: impl Fn(i64, i64) -> Option<i64>) -> FieldValue {
        match (self.int(a), self.int(b)) {
            (Some(x), Some(y)) => match f(x, y) {
                Some(v) => FieldValue::I(v),
                None => FieldValue::U,
            },
            _ => FieldValue::U,
        }
    }

    fn packed_words(&self, args: &[Operand]) -> Option<(u128, u128)> {
        let w0 = match self.operand(args.first()?) {
            FieldValue::Info(v) => v,
            FieldValue::I(v) => v as u128,
            _ => return None,
        };
        let w1 = match self.operand(args.get(1)?) {
            FieldValue::Info(v) => v,
            FieldValue::I(v) => v as u128,
            _ => return None,
        };
        Some((w0, w1))
    }

    fn unpack_pair(&self, w0: u128, w1: u128) -> Option<CellSymbol> {
        let mut bytes = Vec::with_capacity(32);
        bytes.extend_from_slice(&w0.to_le_bytes());
        bytes.extend_from_slice(&w1.to_le_bytes());
        let len = bytes[0] as usize;
        if len == 0 || len + 1 > bytes.len() {
            return None;
        }
        crate::tape::unpack_symbol(&bytes[1..=len]).ok()
    }

    fn unpack(&self, args: &[Operand]) -> Option<CellSymbol> {
        let (w0, w1) = self.packed_words(args)?;
        let mut bytes = Vec::with_capacity(32);
        bytes.extend_from_slice(&w0.to_le_bytes());
        bytes.extend_from_slice(&w1.to_le_bytes());
        let len = bytes[0] as usize;
        if len + 1 > bytes.len() {
            return None;
        }
        crate::tape::unpack_symbol(&bytes[1..=len]).ok()
    }

    /// Runs the shared window kernel over the pair's combined payload.
    /// Returns the result plus the length of x's segment, for splitting.
    fn g_window(&self, args: &[Operand]) -> Option<(crate::gmachine::WindowResult, u32)> {
        let budget = match args.first().map(|a| self.operand(a)) {
            Some(FieldValue::I(v)) if v > 0 => v as u32,
            _ => 1,
        };
        let x = &self.a0;
        let y = &self.b0;
        let mut window = x.payload.tape.clone();
        let xlen = window.len() as u32;
        window.extend(y.payload.tape.iter().copied());
        // Position is local to the carrying cell's segment.
        let pos = if let Some(p) = x.payload.pos {
            p
        } else if let Some(p) = y.payload.pos {
            PayloadPos {
                offset: p.offset + xlen,
                ..p
            }
        } else {
            return None;
        };
        Some((run_window(self.env.g, &window, pos, budget), xlen))
    }

    fn op(&self, op: OpCode, side: Side, args: &[Operand]) -> FieldValue {
        let cell = self.cell(side);
        match op {
            OpCode::MajHoldInfo => maj3(cell.hold.iter().map(|h| match h.info {
                Some(v) => FieldValue::Info(v),
                None => FieldValue::U,
            })),
            OpCode::MajHoldDrift => maj3(
                cell.hold
                    .iter()
                    .map(|h| FieldValue::from_opt_int(h.drift.map(|v| v as i64))),
            ),
            OpCode::MajHoldReplace => maj3(
                cell.hold
                    .iter()
                    .map(|h| FieldValue::from_opt_int(h.replace.map(|v| v as i64))),
            ),
            OpCode::MajCompliant => maj3(
                cell.compliant
                    .iter()
                    .map(|c| FieldValue::from_opt_int(c.map(|v| v as i64))),
            ),
            OpCode::PsiSymAt => {
                let (w0, w1) = match self.packed_words(args) {
                    Some(w) => w,
                    None => return FieldValue::U,
                };
                let p = self.env.params;
                let addr = cell.addr;
                let pad = p.pad_len as i64;
                let int_end = (p.q - p.pad_len) as i64;
                if addr < pad || addr >= int_end {
                    FieldValue::Info(0)
                } else {
                    let m = self.env.psi.rep.msg_len as i64;
                    let w = if (addr - pad) % m == 0 { w0 } else { w1 };
                    FieldValue::Info(w)
                }
            }
            OpCode::PsiNewSymAt => {
                let pass = args
                    .first()
                    .and_then(|a| self.int(a))
                    .unwrap_or(0)
                    .clamp(0, 1) as u8;
                let word = match self.env.psi.encode_symbol(&CellSymbol::new_state(pass)) {
                    Ok(w) => w,
                    Err(_) => return FieldValue::U,
                };
                // Optional [base, delta] arguments override the cell's own
                // address with (base + delta) mod Q.
                let addr = match (args.get(1), args.get(2)) {
                    (Some(b), Some(d)) => {
                        let b = self.int(b).unwrap_or(0);
                        let d = self.int(d).unwrap_or(0);
                        (b + d).rem_euclid(self.env.params.q as i64) as usize
                    }
                    _ => cell.addr.rem_euclid(self.env.params.q as i64) as usize,
                };
                FieldValue::Info(word[addr])
            }
            OpCode::ExtractOutput => match self.unpack(args) {
                Some(sym) => FieldValue::from_opt_int(sym.output.map(|v| v as i64)),
                None => FieldValue::U,
            },
            OpCode::ExtractPosOffset => match self.unpack(args).and_then(|s| s.payload.pos) {
                Some(p) => FieldValue::I(p.offset as i64),
                None => FieldValue::U,
            },
            OpCode::ExtractPosState => match self.unpack(args).and_then(|s| s.payload.pos) {
                Some(p) => FieldValue::I(p.state as i64),
                None => FieldValue::U,
            },
            OpCode::ExtractPayloadSlice => {
                let sym = match self.unpack(args) {
                    Some(s) => s,
                    None => return FieldValue::U,
                };
                let ppc = self.env.params.payload_per_cell as i64;
                let addr = match args.get(2).and_then(|a| self.int(a)) {
                    Some(a) => a,
                    None => cell.addr,
                };
                let lo = (addr * ppc).max(0) as usize;
                let hi = lo + ppc as usize;
                FieldValue::Seg(
                    (lo..hi)
                        .map(|i| sym.payload.tape.get(i).copied().flatten())
                        .collect(),
                )
            }
            OpCode::GTapeAfter => match self.g_window(args) {
                Some((r, xlen)) => FieldValue::Seg(match side {
                    Side::X => r.tape[..xlen as usize].to_vec(),
                    Side::Y => r.tape[xlen as usize..].to_vec(),
                }),
                None => FieldValue::U,
            },
            OpCode::GPosAfter => match self.g_window(args) {
                Some((r, xlen)) => {
                    let on_x = r.pos.offset < xlen;
                    match (side, on_x) {
                        (Side::X, true) => FieldValue::Pos(PayloadPos {
                            offset: r.pos.offset,
                            side: 0,
                            state: r.pos.state,
                        }),
                        (Side::Y, false) => FieldValue::Pos(PayloadPos {
                            offset: r.pos.offset - xlen,
                            side: 1,
                            state: r.pos.state,
                        }),
                        _ => FieldValue::U,
                    }
                }
                None => FieldValue::U,
            },
            OpCode::GEmitVal => match self.g_window(args) {
                Some((r, _)) => FieldValue::from_opt_int(r.emits.last().map(|&(_, v)| v as i64)),
                None => FieldValue::U,
            },
            OpCode::GEmitSlot => match self.g_window(args) {
                Some((r, _)) => FieldValue::from_opt_int(r.emits.last().map(|&(s, _)| s as i64)),
                None => FieldValue::U,
            },
            OpCode::GDirHint => match self.g_window(args) {
                Some((r, _)) => FieldValue::I(r.dir_hint as i64),
                None => FieldValue::U,
            },
            OpCode::GStuck => match self.g_window(args) {
                Some((r, _)) => FieldValue::I(r.stuck as i64),
                None => FieldValue::I(1),
            },
            OpCode::GEmitted => match self.g_window(args) {
                Some((r, _)) => FieldValue::I(!r.emits.is_empty() as i64),
                None => FieldValue::I(0),
            },
            OpCode::GSteps => match self.g_window(args) {
                Some((r, _)) => FieldValue::I(r.steps as i64),
                None => FieldValue::I(0),
            },
            OpCode::BlankSeg => {
                FieldValue::Seg(vec![None; self.env.params.payload_per_cell as usize])
            }
            OpCode::ComplyAcc => {
                let state = args.first().and_then(|a| self.int(a)).unwrap_or(0);
                let (c0, c1) = match self.packed_words(args.get(1).into_iter().chain(args.get(2)).cloned().collect::<Vec<_>>().as_slice()) {
                    Some(w) => w,
                    None => return FieldValue::U,
                };
                let p = self.env.params;
                let pad = p.pad_len as i64;
                let addr = cell.addr;
                if addr < pad || addr >= (p.q - p.pad_len) as i64 {
                    return FieldValue::I(state);
                }
                let m = self.env.psi.rep.msg_len as i64;
                let want = if (addr - pad) % m == 0 { c0 } else { c1 };
                let mut bursts = state & 0xff;
                let mut cover_end = (state >> 8) & 0xff; // addr+1 of burst end, 0 = none
                let mut m0 = (state >> 16) & 0xff;
                let mut m1 = (state >> 24) & 0xff;
                let matches = cell.info == Some(want);
                if matches {
                    if (addr - pad) % m == 0 {
                        m0 += 1;
                    } else {
                        m1 += 1;
                    }
                } else {
                    // Greedy burst cover with bursts of length beta_code = m.
                    if cover_end == 0 || addr >= cover_end {
                        bursts += 1;
                        cover_end = addr + m;
                    }
                }
                FieldValue::I(bursts | (cover_end << 8) | (m0 << 16) | (m1 << 24))
            }
            OpCode::ComplyOk => {
                let state = args.first().and_then(|a| self.int(a)).unwrap_or(0);
                let bursts = state & 0xff;
                let m0 = (state >> 16) & 0xff;
                let m1 = (state >> 24) & 0xff;
                FieldValue::I((bursts <= 2 && m0 >= 3 && m1 >= 3) as i64)
            }
            OpCode::LoadWord => {
                let base = match args.first().and_then(|a| self.int(a)) {
                    Some(v) if v >= 0 => v as u32,
                    _ => return FieldValue::U,
                };
                let mut w: u128 = 0;
                for j in 0..8u32 {
                    let idx = base + j;
                    let mut tok = 0u16;
                    for c in [&self.a0, &self.b0] {
                        if let Some(cbase) = crate::interp::cell_tok_base(c, self.env.params.q as i64) {
                            if idx >= cbase && idx < cbase + TOKENS_PER_CELL {
                                tok = c
                                    .work
                                    .toks
                                    .get((idx - cbase) as usize)
                                    .copied()
                                    .unwrap_or(0);
                            }
                        }
                    }
                    w |= (tok as u128) << (16 * j);
                }
                FieldValue::Info(w)
            }
            OpCode::ExtractReplace => {
                if args.len() < 5 {
                    return FieldValue::U;
                }
                let wa = self.packed_words(&args[0..2]);
                let wb = self.packed_words(&args[2..4]);
                let d = self.int(&args[4]).unwrap_or(1);
                let sym = if d >= 1 {
                    wb.and_then(|(w0, w1)| self.unpack_pair(w0, w1))
                } else {
                    wa.and_then(|(w0, w1)| self.unpack_pair(w0, w1))
                };
                match sym {
                    Some(c) if c.kind == crate::tape::Kind::New => {
                        FieldValue::I(c.pass.max(0) as i64)
                    }
                    _ => FieldValue::U,
                }
            }
            OpCode::InterpCtl | OpCode::InterpDir | OpCode::InterpDone => {
                crate::interp::interp_op(self.env, &self.a0, &self.b0, op)
            }
            OpCode::LegalPair => {
                let v = crate::program::legality::pair_legal(self.env.params, &self.a0, &self.b0, self.alpha);
                FieldValue::I(v as i64)
            }
            OpCode::ExtendCore => {
                let f = match args.first() {
                    Some(Operand::Lit(code)) => field_from_code(*code),
                    _ => None,
                };
                match f {
                    Some(f) => {
                        crate::program::legality::extend_core(self.env.params, self.cell(other(side)), cell, side == Side::Y, f)
                    }
                    None => FieldValue::U,
                }
            }
        }
    }
}

fn other(s: Side) -> Side {
    match s {
        Side::X => Side::Y,
        Side::Y => Side::X,
    }
}

/// Stable numeric codes for fields used as operator arguments.
pub fn field_code(f: FieldId) -> i64 {
    field_table()
        .iter()
        .position(|&g| g == f)
        .map(|i| i as i64)
        .unwrap_or(-1)
}

pub fn field_from_code(c: i64) -> Option<FieldId> {
    field_table().get(usize::try_from(c).ok()?).copied()
}

fn field_table() -> &'static [FieldId] {
    use FieldId::*;
    &[
        KindF,
        InfoF,
        Addr,
        Age,
        Sweep,
        Drift,
        Pass,
        Replace,
        BigDigression,
        FrontAddr,
        RebuildSweep,
        RebuildAddr,
        RebuildHalf,
        RebuildBase,
        RebuildR1,
        RebuildR2,
        WorkMode,
        Index,
        Output,
        ProcF,
        PayloadTape,
        PayloadPosF,
        HoldInfo(0),
        HoldInfo(1),
        HoldInfo(2),
        HoldDrift(0),
        HoldDrift(1),
        HoldDrift(2),
        HoldReplace(0),
        HoldReplace(1),
        HoldReplace(2),
        Compliant(0),
        Compliant(1),
        Compliant(2),
    ]
}

fn maj3(vals: impl Iterator<Item = FieldValue>) -> FieldValue {
    let vals: Vec<FieldValue> = vals.collect();
    for v in &vals {
        let n = vals.iter().filter(|w| *w == v).count();
        if n >= 2 {
            return v.clone();
        }
    }
    FieldValue::U
}

/// Evaluates the program on the observed pair. Deterministic: rules top-down,
/// first match fires.
pub fn eval(
    prog: &RuleProgram,
    env: &RuleEnv,
    va: (&CellSymbol, &CellSymbol),
    alpha: bool,
) -> Result<EvalOut, RuleError> {
    let mut ctx = EvalCtx {
        env,
        a0: va.0.clone(),
        b0: va.1.clone(),
        a: va.0.clone(),
        b: va.1.clone(),
        alpha,
        dir: None,
        wpb_calls: 0,
        wpb_blank: false,
    };
    let fired = prog
        .rules
        .iter()
        .find(|r| ctx.cond(&r.guard))
        .ok_or(RuleError::NoRuleMatched)?;
    exec(&mut ctx, &fired.body)?;
    let dir = ctx.dir.ok_or_else(|| RuleError::NoDirection(fired.name.clone()))?;
    Ok(EvalOut {
        a: ctx.a,
        b: ctx.b,
        dir,
        fired: fired.name.clone(),
        wpb_calls: ctx.wpb_calls,
        wpb_blank: ctx.wpb_blank,
    })
}

/// Evaluates one rule in isolation: Ok(None) when the guard does not hold.
/// Used by the interpreter kernel, which parses rules off the track one at a
/// time and must agree with [`eval`] exactly.
pub fn eval_single(
    rule: &Rule,
    env: &RuleEnv,
    va: (&CellSymbol, &CellSymbol),
    alpha: bool,
) -> Result<Option<EvalOut>, RuleError> {
    let mut ctx = EvalCtx {
        env,
        a0: va.0.clone(),
        b0: va.1.clone(),
        a: va.0.clone(),
        b: va.1.clone(),
        alpha,
        dir: None,
        wpb_calls: 0,
        wpb_blank: false,
    };
    if !ctx.cond(&rule.guard) {
        return Ok(None);
    }
    exec(&mut ctx, &rule.body)?;
    let dir = ctx
        .dir
        .ok_or_else(|| RuleError::NoDirection(rule.name.clone()))?;
    Ok(Some(EvalOut {
        a: ctx.a,
        b: ctx.b,
        dir,
        fired: rule.name.clone(),
        wpb_calls: ctx.wpb_calls,
        wpb_blank: ctx.wpb_blank,
    }))
}

fn exec(ctx: &mut EvalCtx, i: &Instr) -> Result<(), RuleError> {
    match i {
        Instr::Nop => {}
        Instr::Seq(is) => {
            for i in is {
                exec(ctx, i)?;
            }
        }
        Instr::If(c, t, e) => {
            if ctx.cond(c) {
                exec(ctx, t)?;
            } else {
                exec(ctx, e)?;
            }
        }
        Instr::Move(o) => {
            let d = ctx.int(o).unwrap_or(1);
            ctx.dir = Some(if d < 0 { -1 } else { 1 });
        }
        Instr::Assign(s, f, e) => {
            let v = ctx.expr(e);
            let _ = ctx.cell_mut(*s).set(*f, v);
        }
        Instr::WriteTokAt(s, slot, e) => {
            // The slot is an absolute track index, clipped to the side cell.
            let slot = ctx.int(slot);
            let v = ctx.expr(e);
            if let Some(idx) = slot {
                let q = ctx.env.params.q as i64;
                let cell = ctx.cell_mut(*s);
                if let Some(cbase) = crate::interp::cell_tok_base(cell, q) {
                    let idx = idx as u32;
                    if idx >= cbase && idx < cbase + TOKENS_PER_CELL {
                        let _ = cell.set(FieldId::WorkTok((idx - cbase) as u16), v);
                    }
                }
            }
        }
        Instr::InterpCommit => {
            let (a0, b0) = (ctx.a0.clone(), ctx.b0.clone());
            crate::interp::commit_step(ctx.env, &a0, &b0, &mut ctx.a, &mut ctx.b);
        }
        Instr::StoreWords(s, base, words) => {
            let base = match ctx.int(base) {
                Some(v) if v >= 0 => v as u32,
                _ => return Ok(()),
            };
            let vals: Vec<u128> = words
                .iter()
                .map(|w| match ctx.operand(w) {
                    FieldValue::Info(v) => v,
                    FieldValue::I(v) => v as u128,
                    _ => 0,
                })
                .collect();
            let q = ctx.env.params.q as i64;
            let cell = ctx.cell_mut(*s);
            if let Some(cbase) = crate::interp::cell_tok_base(cell, q) {
                for (i, v) in vals.iter().enumerate() {
                    for j in 0..8u32 {
                        let idx = base + (i as u32) * 8 + j;
                        if idx >= cbase && idx < cbase + TOKENS_PER_CELL {
                            let slot = (idx - cbase) as usize;
                            if cell.work.toks.len() <= slot {
                                cell.work.toks.resize(slot + 1, 0);
                            }
                            cell.work.toks[slot] = ((v >> (16 * j)) & 0xffff) as u16;
                        }
                    }
                }
            }
        }
        Instr::CarryRegs(from, to) => {
            let regs = ctx.cell(*from).work.regs.clone();
            ctx.cell_mut(*to).work.regs = regs;
        }
        Instr::ClearRegs(s) => {
            ctx.cell_mut(*s).work.regs = Default::default();
        }
        Instr::CarryRegs(from, to) => {
            let regs = ctx.cell(*from).work.regs.clone();
            ctx.cell_mut(*to).work.regs = regs;
        }
        Instr::ClearRegs(s) => {
            ctx.cell_mut(*s).work.regs = Default::default();
        }
        Instr::WriteProgramCell(s) => {
            ctx.wpb_calls += 1;
            let q = ctx.env.params.q as i64;
            let Some(base) = crate::interp::cell_tok_base(ctx.cell(*s), q) else {
                return Ok(());
            };
            let r = ctx.env.r_tokens;
            let cell = ctx.cell_mut(*s);
            cell.work.toks.resize(TOKENS_PER_CELL as usize, 0);
            for slot in 0..TOKENS_PER_CELL as usize {
                let i = base as usize + slot;
                cell.work.toks[slot] = r.get(i).copied().unwrap_or(0);
            }
        }
        Instr::WriteProgramBit => {
            ctx.wpb_calls += 1;
            let idx = ctx.a0.index;
            let (slot, val) = match idx {
                Some(i) if i >= 1 && (i as usize) <= ctx.env.r_tokens.len() => {
                    let slot = ((i - 1) % TOKENS_PER_CELL as i64) as u16;
                    (slot, FieldValue::I(ctx.env.r_tokens[(i - 1) as usize] as i64))
                }
                _ => {
                    // Out of range: write a distinguished blank, logged.
                    ctx.wpb_blank = true;
                    (0, FieldValue::I(0))
                }
            };
            let _ = ctx.cell_mut(Side::X).set(FieldId::WorkTok(slot), val);
        }

    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Serialization: printable text (canonical program file) and the token string
// R used by the self-simulation. Both forms are 1:1 with the AST.
// ---------------------------------------------------------------------------

pub mod tokens {
    //! The token alphabet of R. Small values are structural opcodes; ranges
    //! encode field references, parameters, operator ids, and small literals
    //! in a single token each.

    pub const T_RULE: u16 = 1;
    pub const T_CMP: u16 = 2; // followed by cmp token 64+op
    pub const T_DEFINED: u16 = 3;
    pub const T_ADJ: u16 = 4;
    pub const T_ALL: u16 = 5;
    pub const T_ANY: u16 = 6;
    pub const T_NOT: u16 = 7;
    pub const T_PRED: u16 = 8;
    pub const T_LIT: u16 = 9; // big literal: 4 raw tokens follow
    pub const T_UNDEF: u16 = 10;
    pub const T_TOKX: u16 = 11;
    pub const T_TOKY: u16 = 12;
    pub const T_ASSIGN: u16 = 14;
    pub const T_WRITETOK: u16 = 15;
    pub const T_WPB: u16 = 16;
    pub const T_MOVE: u16 = 17;
    pub const T_SEQ: u16 = 18;
    pub const T_IF: u16 = 19;
    pub const T_NOP: u16 = 20;
    pub const T_ADD: u16 = 21;
    pub const T_SUB: u16 = 22;
    pub const T_MUL: u16 = 23;
    pub const T_DIV: u16 = 24;
    pub const T_MOD: u16 = 25;
    pub const T_OP: u16 = 26;
    pub const T_END: u16 = 29;
    pub const T_ICOMMIT: u16 = 30;
    pub const T_STOREWORDS: u16 = 31;
    pub const T_WPC: u16 = 32;
    /// Alignment filler between rules (skipped by the interpreter).
    pub const T_PAD: u16 = 33;
    pub const T_CARRY: u16 = 34;
    pub const T_CLEARREGS: u16 = 35;

    pub const CMP_BASE: u16 = 64; // 64..70: comparison operator
    pub const PARAM_BASE: u16 = 128; // 128..192: parameter id
    pub const OPC_BASE: u16 = 192; // 192 + op·2 + side
    pub const FIELDX_BASE: u16 = 8192; // 8192..10240: field of x
    pub const FIELDY_BASE: u16 = 10240; // 10240..12288: field of y
    pub const SMALL_LIT_BASE: u16 = 16384; // value − 4096 .. + 4096
    pub const SMALL_LIT_BIAS: i64 = 4096;
}

fn push_int(out: &mut Vec<u16>, v: i64) {
    use tokens::*;
    if (-SMALL_LIT_BIAS..SMALL_LIT_BIAS).contains(&v) {
        out.push(SMALL_LIT_BASE + (v + SMALL_LIT_BIAS) as u16);
        return;
    }
    out.push(T_LIT);
    let u = v as u64;
    for i in 0..4 {
        out.push(((u >> (16 * i)) & 0xffff) as u16);
    }
}

fn fid_code16(f: FieldId) -> u16 {
    use FieldId::*;
    match f {
        KindF => 0,
        InfoF => 1,
        Addr => 2,
        Age => 3,
        Sweep => 4,
        Drift => 5,
        Pass => 6,
        Replace => 7,
        BigDigression => 8,
        FrontAddr => 9,
        HoldInfo(j) => 10 + j as u16,
        HoldDrift(j) => 13 + j as u16,
        HoldReplace(j) => 16 + j as u16,
        Compliant(j) => 19 + j as u16,
        PayloadTape => 22,
        PayloadPosF => 23,
        RebuildSweep => 24,
        RebuildAddr => 25,
        RebuildHalf => 26,
        RebuildBase => 27,
        RebuildR1 => 28,
        RebuildR2 => 29,
        WorkMode => 30,
        WorkReg(i) => 31 + i as u16,
        Index => 37,
        Output => 38,
        ProcF => 39,
        WorkTok(i) => 40 + i,
    }
}

fn fid_from16(c: u16) -> Option<FieldId> {
    use FieldId::*;
    Some(match c {
        0 => KindF,
        1 => InfoF,
        2 => Addr,
        3 => Age,
        4 => Sweep,
        5 => Drift,
        6 => Pass,
        7 => Replace,
        8 => BigDigression,
        9 => FrontAddr,
        10..=12 => HoldInfo((c - 10) as u8),
        13..=15 => HoldDrift((c - 13) as u8),
        16..=18 => HoldReplace((c - 16) as u8),
        19..=21 => Compliant((c - 19) as u8),
        22 => PayloadTape,
        23 => PayloadPosF,
        24 => RebuildSweep,
        25 => RebuildAddr,
        26 => RebuildHalf,
        27 => RebuildBase,
        28 => RebuildR1,
        29 => RebuildR2,
        30 => WorkMode,
        31..=36 => WorkReg((c - 31) as u8),
        37 => Index,
        38 => Output,
        39 => ProcF,
        c if c >= 40 && c < 2048 => WorkTok(c - 40),
        _ => return None,
    })
}

fn pname_code(p: PName) -> u16 {
    use PName::*;
    match p {
        K => 0,
        Q => 1,
        QMinus1 => 2,
        PadLen => 3,
        IntEnd => 4,
        Z => 5,
        ZHalf => 6,
        F => 7,
        Delta => 8,
        SmallStarve => 9,
        BigStarve => 10,
        Overshoot => 11,
        PayloadPerCell => 12,
        TokPerCell => 13,
        RLen => 14,
        MSyms => 15,
        VaBase => 16,
        ResBase => 17,
        BigDigOmega => 18,
        BigDigDeltaNeg => 19,
        BigDigDeltaPos => 20,
        PayloadBudget => 21,
        WorkEndCell => 22,
        VaSymB => 23,
        VaAlpha => 24,
        VaCellA => 25,
        VaCellB => 26,
        ResCellA => 27,
        ResCellB => 28,
        ResDir => 29,
    }
}

fn pname_from(c: u16) -> Option<PName> {
    use PName::*;
    Some(match c {
        0 => K,
        1 => Q,
        2 => QMinus1,
        3 => PadLen,
        4 => IntEnd,
        5 => Z,
        6 => ZHalf,
        7 => F,
        8 => Delta,
        9 => SmallStarve,
        10 => BigStarve,
        11 => Overshoot,
        12 => PayloadPerCell,
        13 => TokPerCell,
        14 => RLen,
        15 => MSyms,
        16 => VaBase,
        17 => ResBase,
        18 => BigDigOmega,
        19 => BigDigDeltaNeg,
        20 => BigDigDeltaPos,
        21 => PayloadBudget,
        22 => WorkEndCell,
        23 => VaSymB,
        24 => VaAlpha,
        25 => VaCellA,
        26 => VaCellB,
        27 => ResCellA,
        28 => ResCellB,
        29 => ResDir,
        _ => return None,
    })
}

fn opcode_code(o: OpCode) -> u16 {
    use OpCode::*;
    match o {
        MajHoldInfo => 0,
        MajHoldDrift => 1,
        MajHoldReplace => 2,
        MajCompliant => 3,
        PsiSymAt => 4,
        PsiNewSymAt => 5,
        ExtractOutput => 6,
        ExtractPosOffset => 7,
        ExtractPosState => 8,
        ExtractPayloadSlice => 9,
        GTapeAfter => 10,
        GPosAfter => 11,
        GEmitVal => 12,
        GEmitSlot => 13,
        GDirHint => 14,
        GStuck => 15,
        InterpCtl => 16,
        InterpDir => 17,
        InterpDone => 18,
        LegalPair => 19,
        ExtendCore => 20,
        GEmitted => 21,
        GSteps => 22,
        BlankSeg => 23,
        ComplyAcc => 24,
        ComplyOk => 25,
        LoadWord => 26,
        ExtractReplace => 27,
    }
}

fn opcode_from(c: u16) -> Option<OpCode> {
    use OpCode::*;
    Some(match c {
        0 => MajHoldInfo,
        1 => MajHoldDrift,
        2 => MajHoldReplace,
        3 => MajCompliant,
        4 => PsiSymAt,
        5 => PsiNewSymAt,
        6 => ExtractOutput,
        7 => ExtractPosOffset,
        8 => ExtractPosState,
        9 => ExtractPayloadSlice,
        10 => GTapeAfter,
        11 => GPosAfter,
        12 => GEmitVal,
        13 => GEmitSlot,
        14 => GDirHint,
        15 => GStuck,
        16 => InterpCtl,
        17 => InterpDir,
        18 => InterpDone,
        19 => LegalPair,
        20 => ExtendCore,
        21 => GEmitted,
        22 => GSteps,
        23 => BlankSeg,
        24 => ComplyAcc,
        25 => ComplyOk,
        26 => LoadWord,
        27 => ExtractReplace,
        _ => return None,
    })
}

fn emit_operand(out: &mut Vec<u16>, o: &Operand) {
    use tokens::*;
    match o {
        Operand::Lit(v) => push_int(out, *v),
        Operand::Undef => out.push(T_UNDEF),
        Operand::Param(p) => out.push(PARAM_BASE + pname_code(*p)),
        Operand::Field(s, f) => {
            let base = match s {
                Side::X => FIELDX_BASE,
                Side::Y => FIELDY_BASE,
            };
            out.push(base + fid_code16(*f));
        }
        Operand::Tok(s, slot) => {
            out.push(match s {
                Side::X => T_TOKX,
                Side::Y => T_TOKY,
            });
            emit_operand(out, slot);
        }
    }
}

fn emit_cond(out: &mut Vec<u16>, c: &Cond) {
    use tokens::*;
    match c {
        Cond::Cmp(l, op, r) => {
            out.push(T_CMP);
            out.push(CMP_BASE + *op as u16);
            emit_expr(out, l);
            emit_expr(out, r);
        }
        Cond::Defined(s, f) => {
            out.push(T_DEFINED);
            let base = match s {
                Side::X => FIELDX_BASE,
                Side::Y => FIELDY_BASE,
            };
            out.push(base + fid_code16(*f));
        }
        Cond::Adjacent => out.push(T_ADJ),
        Cond::All(cs) => {
            out.push(T_ALL);
            out.push(cs.len() as u16);
            for c in cs {
                emit_cond(out, c);
            }
        }
        Cond::Any(cs) => {
            out.push(T_ANY);
            out.push(cs.len() as u16);
            for c in cs {
                emit_cond(out, c);
            }
        }
        Cond::Not(c) => {
            out.push(T_NOT);
            emit_cond(out, c);
        }
        Cond::Pred(op, s, args) => {
            out.push(T_PRED);
            out.push(OPC_BASE + opcode_code(*op) * 2 + (*s == Side::Y) as u16);
            out.push(args.len() as u16);
            for a in args {
                emit_operand(out, a);
            }
        }
    }
}

fn emit_expr(out: &mut Vec<u16>, e: &Expr) {
    use tokens::*;
    match e {
        Expr::Operand(o) => emit_operand(out, o),
        Expr::Add(a, b) => {
            out.push(T_ADD);
            emit_operand(out, a);
            emit_operand(out, b);
        }
        Expr::Sub(a, b) => {
            out.push(T_SUB);
            emit_operand(out, a);
            emit_operand(out, b);
        }
        Expr::Mul(a, b) => {
            out.push(T_MUL);
            emit_operand(out, a);
            emit_operand(out, b);
        }
        Expr::Div(a, b) => {
            out.push(T_DIV);
            emit_operand(out, a);
            emit_operand(out, b);
        }
        Expr::Mod(a, b) => {
            out.push(T_MOD);
            emit_operand(out, a);
            emit_operand(out, b);
        }
        Expr::Op(op, s, args) => {
            out.push(T_OP);
            out.push(OPC_BASE + opcode_code(*op) * 2 + (*s == Side::Y) as u16);
            out.push(args.len() as u16);
            for a in args {
                emit_operand(out, a);
            }
        }
    }
}

fn emit_instr(out: &mut Vec<u16>, i: &Instr) {
    use tokens::*;
    match i {
        Instr::Assign(s, f, e) => {
            out.push(T_ASSIGN);
            let base = match s {
                Side::X => FIELDX_BASE,
                Side::Y => FIELDY_BASE,
            };
            out.push(base + fid_code16(*f));
            emit_expr(out, e);
        }
        Instr::WriteTokAt(s, slot, e) => {
            out.push(T_WRITETOK);
            out.push(match s {
                Side::X => T_TOKX,
                Side::Y => T_TOKY,
            });
            emit_operand(out, slot);
            emit_expr(out, e);
        }
        Instr::WriteProgramBit => out.push(T_WPB),
        Instr::WriteProgramCell(s) => {
            out.push(T_WPC);
            out.push(match s {
                Side::X => T_TOKX,
                Side::Y => T_TOKY,
            });
        }
        Instr::CarryRegs(a, b) => {
            out.push(T_CARRY);
            out.push(match a {
                Side::X => T_TOKX,
                Side::Y => T_TOKY,
            });
            out.push(match b {
                Side::X => T_TOKX,
                Side::Y => T_TOKY,
            });
        }
        Instr::ClearRegs(s) => {
            out.push(T_CLEARREGS);
            out.push(match s {
                Side::X => T_TOKX,
                Side::Y => T_TOKY,
            });
        }
        Instr::InterpCommit => out.push(T_ICOMMIT),
        Instr::StoreWords(s, base, words) => {
            out.push(T_STOREWORDS);
            out.push(match s {
                Side::X => T_TOKX,
                Side::Y => T_TOKY,
            });
            emit_operand(out, base);
            out.push(words.len() as u16);
            for w in words {
                emit_operand(out, w);
            }
        }
        Instr::Move(o) => {
            out.push(T_MOVE);
            emit_operand(out, o);
        }
        Instr::Seq(is) => {
            out.push(T_SEQ);
            out.push(is.len() as u16);
            for i in is {
                emit_instr(out, i);
            }
        }
        Instr::If(c, t, e) => {
            out.push(T_IF);
            emit_cond(out, c);
            emit_instr(out, t);
            emit_instr(out, e);
        }
        Instr::Nop => out.push(T_NOP),
    }
}

/// Serializes the program to its token string R. Rule names are not part of
/// R (they are comments for humans).
pub fn to_tokens(prog: &RuleProgram) -> Vec<u16> {
    // Rules are padded so none straddles a work-cell boundary; the
    // interpreter can then always parse a rule from a single visible cell.
    let w = TOKENS_PER_CELL as usize;
    let mut out = Vec::new();
    for r in &prog.rules {
        let mut toks = vec![tokens::T_RULE];
        emit_cond(&mut toks, &r.guard);
        emit_instr(&mut toks, &r.body);
        assert!(toks.len() <= w, "rule exceeds one work cell: {}", toks.len());
        if (out.len() % w) + toks.len() > w {
            while out.len() % w != 0 {
                out.push(tokens::T_PAD);
            }
        }
        out.extend(toks);
    }
    out.push(tokens::T_END);
    out
}

pub struct TokenReader<'a> {
    pub toks: &'a [u16],
    pub pos: usize,
}

impl<'a> TokenReader<'a> {
    pub fn new(toks: &'a [u16]) -> Self {
        TokenReader { toks, pos: 0 }
    }

    fn next(&mut self) -> Result<u16, RuleError> {
        let t = self
            .toks
            .get(self.pos)
            .copied()
            .ok_or_else(|| RuleError::Parse("unexpected end of R".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<u16> {
        self.toks.get(self.pos).copied()
    }

    pub fn read_cond_pub(&mut self) -> Result<Cond, RuleError> {
        self.read_cond()
    }

    pub fn read_instr_pub(&mut self) -> Result<Instr, RuleError> {
        self.read_instr()
    }

    fn read_opcode_side(&mut self) -> Result<(OpCode, Side), RuleError> {
        use tokens::*;
        let t = self.next()?;
        if t < OPC_BASE {
            return Err(RuleError::Parse(format!("bad opcode token {t}")));
        }
        let v = t - OPC_BASE;
        let op = opcode_from(v / 2).ok_or_else(|| RuleError::Parse("bad opcode".into()))?;
        let s = if v % 2 == 1 { Side::Y } else { Side::X };
        Ok((op, s))
    }

    fn read_field_ref(&mut self) -> Result<(Side, FieldId), RuleError> {
        use tokens::*;
        let t = self.next()?;
        if (FIELDX_BASE..FIELDY_BASE).contains(&t) {
            let f = fid_from16(t - FIELDX_BASE)
                .ok_or_else(|| RuleError::Parse("bad field".into()))?;
            Ok((Side::X, f))
        } else if (FIELDY_BASE..FIELDY_BASE + 2048).contains(&t) {
            let f = fid_from16(t - FIELDY_BASE)
                .ok_or_else(|| RuleError::Parse("bad field".into()))?;
            Ok((Side::Y, f))
        } else {
            Err(RuleError::Parse(format!("bad field token {t}")))
        }
    }

    fn read_operand(&mut self) -> Result<Operand, RuleError> {
        use tokens::*;
        let t = self.next()?;
        if t >= SMALL_LIT_BASE && (t as i64) < SMALL_LIT_BASE as i64 + 2 * SMALL_LIT_BIAS {
            return Ok(Operand::Lit(t as i64 - SMALL_LIT_BASE as i64 - SMALL_LIT_BIAS));
        }
        if (PARAM_BASE..PARAM_BASE + 64).contains(&t) {
            return Ok(Operand::Param(
                pname_from(t - PARAM_BASE).ok_or_else(|| RuleError::Parse("bad param".into()))?,
            ));
        }
        if (FIELDX_BASE..FIELDY_BASE).contains(&t) {
            let fl = fid_from16(t - FIELDX_BASE)
                .ok_or_else(|| RuleError::Parse("bad field".into()))?;
            return Ok(Operand::Field(Side::X, fl));
        }
        if (FIELDY_BASE..FIELDY_BASE + 2048).contains(&t) {
            let fl = fid_from16(t - FIELDY_BASE)
                .ok_or_else(|| RuleError::Parse("bad field".into()))?;
            return Ok(Operand::Field(Side::Y, fl));
        }
        match t {
            T_LIT => {
                let mut u: u64 = 0;
                for i in 0..4 {
                    u |= (self.next()? as u64) << (16 * i);
                }
                Ok(Operand::Lit(u as i64))
            }
            T_UNDEF => Ok(Operand::Undef),
            T_TOKX => Ok(Operand::Tok(Side::X, Box::new(self.read_operand()?))),
            T_TOKY => Ok(Operand::Tok(Side::Y, Box::new(self.read_operand()?))),
            t => Err(RuleError::Parse(format!("bad operand token {t}"))),
        }
    }

    fn read_cond(&mut self) -> Result<Cond, RuleError> {
        use tokens::*;
        Ok(match self.next()? {
            T_CMP => {
                let t = self.next()?;
                if !(CMP_BASE..CMP_BASE + 6).contains(&t) {
                    return Err(RuleError::Parse(format!("bad cmp {t}")));
                }
                let op = match t - CMP_BASE {
                    0 => Cmp::Eq,
                    1 => Cmp::Ne,
                    2 => Cmp::Lt,
                    3 => Cmp::Le,
                    4 => Cmp::Gt,
                    _ => Cmp::Ge,
                };
                Cond::Cmp(self.read_expr()?, op, self.read_expr()?)
            }
            T_DEFINED => {
                let (s, fl) = self.read_field_ref()?;
                Cond::Defined(s, fl)
            }
            T_ADJ => Cond::Adjacent,
            T_ALL => {
                let n = self.next()? as usize;
                if n > 64 {
                    return Err(RuleError::Parse("oversized conjunction".into()));
                }
                Cond::All((0..n).map(|_| self.read_cond()).collect::<Result<_, _>>()?)
            }
            T_ANY => {
                let n = self.next()? as usize;
                if n > 64 {
                    return Err(RuleError::Parse("oversized disjunction".into()));
                }
                Cond::Any((0..n).map(|_| self.read_cond()).collect::<Result<_, _>>()?)
            }
            T_NOT => Cond::Not(Box::new(self.read_cond()?)),
            T_PRED => {
                let (op, s) = self.read_opcode_side()?;
                let n = self.next()? as usize;
                if n > 8 {
                    return Err(RuleError::Parse("oversized args".into()));
                }
                Cond::Pred(
                    op,
                    s,
                    (0..n).map(|_| self.read_operand()).collect::<Result<_, _>>()?,
                )
            }
            t => return Err(RuleError::Parse(format!("bad cond token {t}"))),
        })
    }

    fn read_expr(&mut self) -> Result<Expr, RuleError> {
        use tokens::*;
        Ok(match self.peek() {
            Some(T_ADD) | Some(T_SUB) | Some(T_MUL) | Some(T_DIV) | Some(T_MOD) => {
                let t = self.next()?;
                let a = self.read_operand()?;
                let b = self.read_operand()?;
                match t {
                    T_ADD => Expr::Add(a, b),
                    T_SUB => Expr::Sub(a, b),
                    T_MUL => Expr::Mul(a, b),
                    T_DIV => Expr::Div(a, b),
                    _ => Expr::Mod(a, b),
                }
            }
            Some(T_OP) => {
                self.next()?;
                let (op, s) = self.read_opcode_side()?;
                let n = self.next()? as usize;
                if n > 8 {
                    return Err(RuleError::Parse("oversized args".into()));
                }
                Expr::Op(
                    op,
                    s,
                    (0..n).map(|_| self.read_operand()).collect::<Result<_, _>>()?,
                )
            }
            _ => Expr::Operand(self.read_operand()?),
        })
    }

    fn read_instr(&mut self) -> Result<Instr, RuleError> {
        use tokens::*;
        Ok(match self.next()? {
            T_ASSIGN => {
                let (s, fl) = self.read_field_ref()?;
                Instr::Assign(s, fl, self.read_expr()?)
            }
            T_WRITETOK => {
                let s = match self.next()? {
                    T_TOKX => Side::X,
                    T_TOKY => Side::Y,
                    t => return Err(RuleError::Parse(format!("bad side token {t}"))),
                };
                let slot = self.read_operand()?;
                Instr::WriteTokAt(s, slot, self.read_expr()?)
            }
            T_WPB => Instr::WriteProgramBit,
            T_CARRY => {
                let a = match self.next()? {
                    T_TOKX => Side::X,
                    T_TOKY => Side::Y,
                    t => return Err(RuleError::Parse(format!("bad side token {t}"))),
                };
                let b = match self.next()? {
                    T_TOKX => Side::X,
                    T_TOKY => Side::Y,
                    t => return Err(RuleError::Parse(format!("bad side token {t}"))),
                };
                Instr::CarryRegs(a, b)
            }
            T_CLEARREGS => Instr::ClearRegs(match self.next()? {
                T_TOKX => Side::X,
                T_TOKY => Side::Y,
                t => return Err(RuleError::Parse(format!("bad side token {t}"))),
            }),
            T_WPC => Instr::WriteProgramCell(match self.next()? {
                T_TOKX => Side::X,
                T_TOKY => Side::Y,
                t => return Err(RuleError::Parse(format!("bad side token {t}"))),
            }),
            T_ICOMMIT => Instr::InterpCommit,
            T_STOREWORDS => {
                let s = match self.next()? {
                    T_TOKX => Side::X,
                    T_TOKY => Side::Y,
                    t => return Err(RuleError::Parse(format!("bad side token {t}"))),
                };
                let base = self.read_operand()?;
                let n = self.next()? as usize;
                if n > 8 {
                    return Err(RuleError::Parse("oversized words".into()));
                }
                Instr::StoreWords(
                    s,
                    base,
                    (0..n).map(|_| self.read_operand()).collect::<Result<_, _>>()?,
                )
            }
            T_MOVE => Instr::Move(self.read_operand()?),
            T_SEQ => {
                let n = self.next()? as usize;
                if n > 64 {
                    return Err(RuleError::Parse("oversized sequence".into()));
                }
                Instr::Seq((0..n).map(|_| self.read_instr()).collect::<Result<_, _>>()?)
            }
            T_IF => Instr::If(
                self.read_cond()?,
                Box::new(self.read_instr()?),
                Box::new(self.read_instr()?),
            ),
            T_NOP => Instr::Nop,
            t => return Err(RuleError::Parse(format!("bad instr token {t}"))),
        })
    }
}

/// Parses the token string back into a program (rule names become r0, r1, …).
pub fn from_tokens(toks: &[u16]) -> Result<RuleProgram, RuleError> {
    let mut rd = TokenReader::new(toks);
    let mut rules = Vec::new();
    loop {
        match rd.peek() {
            Some(tokens::T_PAD) => {
                rd.next()?;
            }
            Some(tokens::T_RULE) => {
                rd.next()?;
                let guard = rd.read_cond()?;
                let body = rd.read_instr()?;
                rules.push(Rule {
                    name: format!("r{}", rules.len()),
                    guard,
                    body,
                });
            }
            Some(tokens::T_END) => break,
            Some(t) => return Err(RuleError::Parse(format!("bad top-level token {t}"))),
            None => return Err(RuleError::Parse("missing end marker".into())),
        }
    }
    Ok(RuleProgram { rules })
}

/// Printable canonical program file: a header plus one line of token numbers
/// per rule, with the rule name as a trailing comment.
pub fn to_text(prog: &RuleProgram) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "ftm-rules v1 rules={}", prog.rules.len());
    for r in &prog.rules {
        let mut toks = Vec::new();
        toks.push(tokens::T_RULE);
        emit_cond(&mut toks, &r.guard);
        emit_instr(&mut toks, &r.body);
        let nums: Vec<String> = toks.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(out, "{} # {}", nums.join(" "), r.name);
    }
    let _ = writeln!(out, "{} # end", tokens::T_END);
    out
}

pub fn from_text(text: &str) -> Result<RuleProgram, RuleError> {
    let mut toks = Vec::new();
    let mut names = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if !line.starts_with("ftm-rules v1") {
                return Err(RuleError::Parse("bad header".into()));
            }
            continue;
        }
        let (nums, comment) = match line.split_once('#') {
            Some((a, b)) => (a, b.trim()),
            None => (line, ""),
        };
        if !comment.is_empty() && comment != "end" {
            names.push(comment.to_string());
        }
        for w in nums.split_whitespace() {
            let t: u16 = w
                .parse()
                .map_err(|_| RuleError::Parse(format!("bad token '{w}' on line {}", i + 1)))?;
            toks.push(t);
        }
    }
    let mut prog = from_tokens(&toks)?;
    for (r, name) in prog.rules.iter_mut().zip(names) {
        r.name = name;
    }
    Ok(prog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Kind;

    fn env_fixture() -> (ParamSet, GMachine, PsiCode) {
        let p = ParamSet::toy();
        let psi = PsiCode::for_params(&p).unwrap();
        (p, GMachine::incrementer(), psi)
    }

    fn tiny_prog() -> RuleProgram {
        RuleProgram {
            rules: vec![
                Rule {
                    name: "bump-age".into(),
                    guard: Cond::Cmp(
                        Expr::Operand(Operand::Field(Side::X, FieldId::Addr)),
                        Cmp::Eq,
                        Expr::Operand(Operand::Lit(0)),
                    ),
                    body: Instr::Seq(vec![
                        Instr::Assign(
                            Side::X,
                            FieldId::Age,
                            Expr::Add(Operand::Field(Side::X, FieldId::Age), Operand::Lit(1)),
                        ),
                        Instr::Move(Operand::Lit(1)),
                    ]),
                },
                Rule {
                    name: "default".into(),
                    guard: Cond::All(vec![]),
                    body: Instr::Move(Operand::Lit(-1)),
                },
            ],
        }
    }

    #[test]
    fn single_rule_fires_and_moves() {
        let (p, g, psi) = env_fixture();
        let prog = tiny_prog();
        let r = to_tokens(&prog);
        let env = RuleEnv { k: 1, params: &p, g: &g, r_tokens: &r, psi: &psi };
        let mut x = CellSymbol::blank(Kind::Member0);
        x.addr = 0;
        x.age = 5;
        let y = CellSymbol::blank(Kind::Member0);
        let out = eval(&prog, &env, (&x, &y), true).unwrap();
        assert_eq!(out.a.age, 6);
        assert_eq!(out.dir, 1);
        assert_eq!(out.fired, "bump-age");
        // Determinism: same inputs, same outputs.
        let out2 = eval(&prog, &env, (&x, &y), true).unwrap();
        assert_eq!(out, out2);
    }

    #[test]
    fn write_program_bit_reads_r() {
        let (p, g, psi) = env_fixture();
        let prog = RuleProgram {
            rules: vec![Rule {
                name: "wpb".into(),
                guard: Cond::All(vec![]),
                body: Instr::Seq(vec![Instr::WriteProgramBit, Instr::Move(Operand::Lit(1))]),
            }],
        };
        let r = to_tokens(&prog);
        let env = RuleEnv { k: 1, params: &p, g: &g, r_tokens: &r, psi: &psi };
        let mut x = CellSymbol::blank(Kind::Member0);
        x.index = Some(1);
        let y = CellSymbol::blank(Kind::Member0);
        let out = eval(&prog, &env, (&x, &y), true).unwrap();
        assert_eq!(out.a.work.toks[0] as u16, r[0], "Work holds R(1)");
        assert_eq!(out.wpb_calls, 1);
        assert!(!out.wpb_blank);

        // Out-of-range index writes a blank and flags it.
        let mut x2 = CellSymbol::blank(Kind::Member0);
        x2.index = Some(99_999);
        let out = eval(&prog, &env, (&x2, &y), true).unwrap();
        assert!(out.wpb_blank);
    }

    #[test]
    fn token_round_trip() {
        let prog = tiny_prog();
        let toks = to_tokens(&prog);
        let back = from_tokens(&toks).unwrap();
        assert_eq!(back.rules.len(), prog.rules.len());
        assert_eq!(back.rules[0].guard, prog.rules[0].guard);
        assert_eq!(back.rules[0].body, prog.rules[0].body);
        assert_eq!(to_tokens(&back), toks);
    }

    #[test]
    fn text_round_trip() {
        let prog = tiny_prog();
        let text = to_text(&prog);
        let back = from_text(&text).unwrap();
        assert_eq!(back, prog);
    }

    #[test]
    fn no_rule_matched_is_error() {
        let (p, g, psi) = env_fixture();
        let prog = RuleProgram {
            rules: vec![Rule {
                name: "never".into(),
                guard: Cond::Cmp(
                    Expr::Operand(Operand::Lit(0)),
                    Cmp::Eq,
                    Expr::Operand(Operand::Lit(1)),
                ),
                body: Instr::Move(Operand::Lit(1)),
            }],
        };
        let r = to_tokens(&prog);
        let env = RuleEnv { k: 1, params: &p, g: &g, r_tokens: &r, psi: &psi };
        let x = CellSymbol::blank(Kind::Member0);
        let y = CellSymbol::blank(Kind::Member0);
        assert_eq!(
            eval(&prog, &env, (&x, &y), true).unwrap_err(),
            RuleError::NoRuleMatched
        );
    }

    #[test]
    fn level_parameter_readable() {
        let (p, g, psi) = env_fixture();
        let prog = RuleProgram {
            rules: vec![
                Rule {
                    name: "level2".into(),
                    guard: Cond::Cmp(
                        Expr::Operand(Operand::Param(PName::K)),
                        Cmp::Ge,
                        Expr::Operand(Operand::Lit(2)),
                    ),
                    body: Instr::Move(Operand::Lit(1)),
                },
                Rule {
                    name: "level1".into(),
                    guard: Cond::All(vec![]),
                    body: Instr::Move(Operand::Lit(-1)),
                },
            ],
        };
        let r = to_tokens(&prog);
        let x = CellSymbol::blank(Kind::Member0);
        let y = CellSymbol::blank(Kind::Member0);
        let env1 = RuleEnv { k: 1, params: &p, g: &g, r_tokens: &r, psi: &psi };
        assert_eq!(eval(&prog, &env1, (&x, &y), true).unwrap().dir, -1);
        let env2 = RuleEnv { k: 2, params: &p, g: &g, r_tokens: &r, psi: &psi };
        assert_eq!(eval(&prog, &env2, (&x, &y), true).unwrap().dir, 1);
    }
}
