//! The self-simulation interpreter: a fixed sub-machine that reads the
//! program string R from the work-token track, a level marker 0^{k+1}, and a
//! serialized cell-pair va, and produces τ_{R,k+1}(va).
//!
//! Two drivers share the same step function: [`interpret_on_track`] runs it
//! over a standalone track (the fixed-point tests and step counts), and the
//! machine program embeds it through `InterpCommit`/`Interp*` so the
//! simulation phase executes the identical computation on the real tape, one
//! local step at a time. The result depends only on the track content:
//! corrupted tokens parse into a failure result, never into a crash.

use crate::rules::{self, Rule, RuleEnv, RuleError, TokenReader, TOKENS_PER_CELL};
use crate::tape::{CellSymbol, FieldValue, Kind};
use serde::{Deserialize, Serialize};

/// va layout: 16 tokens per symbol (two packed u128 words), then alpha.
pub const VA_TOKENS: u32 = 33;
/// Result layout: two symbols, direction, status flag.
pub const RES_TOKENS: u32 = 34;
pub const FLAG_OK: u16 = 1;
pub const FLAG_FAIL: u16 = 2;

/// Largest serialized rule the kernel must parse from one work cell.
pub const MAX_RULE_TOKENS: usize = TOKENS_PER_CELL as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IPhase {
    PreScan,
    FetchVa,
    ToStart,
    EvalScan,
    WriteOut,
    Done,
}

/// Bounded control state of the interpreter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InterpCtl {
    pub phase: IPhase,
    /// Absolute token cursor (next token of interest).
    pub cursor: u32,
    /// Token index just after R's end marker (valid after PreScan).
    pub r_end: u32,
    /// Level-marker zeros counted; the simulated level is this count.
    pub zeros: u32,
    /// Collected va words: [a.w0, a.w1, b.w0, b.w1].
    pub va_words: [u128; 4],
    pub alpha: bool,
    pub result: Option<Vec<u16>>,
    pub out_next: u32,
}

impl InterpCtl {
    pub fn start() -> InterpCtl {
        InterpCtl {
            phase: IPhase::PreScan,
            cursor: 0,
            r_end: 0,
            zeros: 0,
            va_words: [0; 4],
            alpha: false,
            result: None,
            out_next: 0,
        }
    }

    pub fn va_base(&self) -> u32 {
        self.r_end + self.zeros
    }

    pub fn res_base(&self) -> u32 {
        self.va_base() + VA_TOKENS
    }
}

/// One kernel step's externally visible effects.
#[derive(Debug, Clone, PartialEq)]
pub struct IStepOut {
    pub ctl: InterpCtl,
    /// Token writes (absolute index, value); a bounded group confined to the
    /// observed pair.
    pub writes: Vec<(u32, u16)>,
    pub dir: i8,
    pub done: bool,
}

/// Read access to the token track for one step.
pub trait TokWindow {
    fn tok(&self, idx: u32) -> Option<u16>;
    fn visible_start(&self) -> u32;
    fn visible_end(&self) -> u32;
}

/// Window over the observed cell-pair: tokens live in Work.toks of the left
/// base colony's cells, global index = Addr·W + slot.
pub struct PairWindow<'a> {
    pub x: &'a CellSymbol,
    pub y: &'a CellSymbol,
    pub q: i64,
}

/// The work track spans both base colonies: Member0 cells hold token
/// stretches [addr·W, (addr+1)·W), Member1 cells continue at (Q + addr)·W.
pub fn cell_tok_base(c: &CellSymbol, q: i64) -> Option<u32> {
    if !(0..1 << 15).contains(&c.addr) {
        return None;
    }
    match c.kind {
        Kind::Member0 => Some(c.addr as u32 * TOKENS_PER_CELL),
        Kind::Member1 => Some((q + c.addr) as u32 * TOKENS_PER_CELL),
        _ => None,
    }
}

impl<'a> TokWindow for PairWindow<'a> {
    fn tok(&self, idx: u32) -> Option<u16> {
        for c in [self.x, self.y] {
            if let Some(base) = cell_tok_base(c, self.q) {
                if idx >= base && idx < base + TOKENS_PER_CELL {
                    return c.work.toks.get((idx - base) as usize).copied().or(Some(0));
                }
            }
        }
        None
    }

    fn visible_start(&self) -> u32 {
        [self.x, self.y]
            .iter()
            .filter_map(|c| cell_tok_base(c, self.q))
            .min()
            .unwrap_or(u32::MAX)
    }

    fn visible_end(&self) -> u32 {
        [self.x, self.y]
            .iter()
            .filter_map(|c| cell_tok_base(c, self.q).map(|b| b + TOKENS_PER_CELL))
            .max()
            .unwrap_or(0)
    }
}

/// Full-track window used by the standalone driver.
pub struct VecWindow<'a> {
    pub toks: &'a [u16],
    pub lo: u32,
    pub hi: u32,
}

impl<'a> TokWindow for VecWindow<'a> {
    fn tok(&self, idx: u32) -> Option<u16> {
        if idx >= self.lo && idx < self.hi {
            self.toks.get(idx as usize).copied().or(Some(0))
        } else {
            None
        }
    }

    fn visible_start(&self) -> u32 {
        self.lo
    }

    fn visible_end(&self) -> u32 {
        self.hi
    }
}

enum RuleParse {
    Ok(Box<Rule>, u32),
    Pad(u32),
    Truncated,
    Bad,
    End,
}

fn parse_rule_at(win: &dyn TokWindow, at: u32) -> RuleParse {
    let end = win.visible_end();
    if at < win.visible_start() || at >= end {
        return RuleParse::Truncated;
    }
    // A rule never exceeds one cell, so a bounded window suffices.
    let cap = (end - at).min(MAX_RULE_TOKENS as u32 + 2);
    let mut buf = Vec::with_capacity(cap as usize);
    let mut i = at;
    while i < at + cap {
        match win.tok(i) {
            Some(t) => buf.push(t),
            None => break,
        }
        i += 1;
    }
    match buf.first() {
        Some(&t) if t == rules::tokens::T_END => return RuleParse::End,
        Some(&t) if t == rules::tokens::T_PAD => {
            // Alignment filler: skip the run in one go.
            let run = buf.iter().take_while(|&&t| t == rules::tokens::T_PAD).count();
            return RuleParse::Pad(run as u32);
        }
        Some(&t) if t != rules::tokens::T_RULE => return RuleParse::Bad,
        None => return RuleParse::Truncated,
        _ => {}
    }
    let mut rd = TokenReader::new(&buf);
    rd.pos = 1;
    let truncated = |m: &str| m.contains("unexpected end");
    let guard = match rd.read_cond_pub() {
        Ok(c) => c,
        Err(RuleError::Parse(m)) if truncated(&m) => {
            return if buf.len() >= 2 * MAX_RULE_TOKENS {
                RuleParse::Bad
            } else {
                RuleParse::Truncated
            }
        }
        Err(_) => return RuleParse::Bad,
    };
    let body = match rd.read_instr_pub() {
        Ok(b) => b,
        Err(RuleError::Parse(m)) if truncated(&m) => {
            return if buf.len() >= 2 * MAX_RULE_TOKENS {
                RuleParse::Bad
            } else {
                RuleParse::Truncated
            }
        }
        Err(_) => return RuleParse::Bad,
    };
    RuleParse::Ok(
        Box::new(Rule {
            name: String::new(),
            guard,
            body,
        }),
        rd.pos as u32,
    )
}

pub fn unpack_words(w0: u128, w1: u128) -> Option<CellSymbol> {
    let mut bytes = Vec::with_capacity(32);
    bytes.extend_from_slice(&w0.to_le_bytes());
    bytes.extend_from_slice(&w1.to_le_bytes());
    let len = bytes[0] as usize;
    if len == 0 || len + 1 > bytes.len() {
        return None;
    }
    crate::tape::unpack_symbol(&bytes[1..=len]).ok()
}

pub fn pack_words(c: &CellSymbol) -> Option<[u128; 2]> {
    let bytes = crate::tape::pack_symbol(c);
    if bytes.len() > 31 {
        return None;
    }
    let mut buf = [0u8; 32];
    buf[0] = bytes.len() as u8;
    buf[1..=bytes.len()].copy_from_slice(&bytes);
    let mut w = [0u128; 2];
    for (i, chunk) in buf.chunks(16).enumerate() {
        let mut arr = [0u8; 16];
        arr.copy_from_slice(chunk);
        w[i] = u128::from_le_bytes(arr);
    }
    Some(w)
}

pub fn words_to_toks(w: &[u128]) -> Vec<u16> {
    let mut out = Vec::with_capacity(w.len() * 8);
    for &word in w {
        for i in 0..8 {
            out.push(((word >> (16 * i)) & 0xffff) as u16);
        }
    }
    out
}

/// Failure result: pass the fetched pair through unchanged with direction
/// +1, flagged FAIL. A failed repetition then encodes a no-change step.
fn fail_result_of(ctl: &InterpCtl) -> Vec<u16> {
    let mut r = words_to_toks(&ctl.va_words);
    r.push(1);
    r.push(FLAG_FAIL);
    r
}

fn result_tokens(out: &rules::EvalOut) -> Vec<u16> {
    let (wa, wb) = match (pack_words(&out.a), pack_words(&out.b)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let mut r = vec![0u16; RES_TOKENS as usize];
            r[32] = if out.dir > 0 { 1 } else { 0 };
            r[33] = FLAG_FAIL;
            return r;
        }
    };
    let mut toks = words_to_toks(&wa);
    toks.extend(words_to_toks(&wb));
    toks.push(if out.dir > 0 { 1 } else { 0 });
    toks.push(FLAG_OK);
    toks
}

fn dir_toward(target: u32, win: &dyn TokWindow) -> i8 {
    if target < win.visible_start() {
        -1
    } else {
        1
    }
}

fn fail_to_writeout(c: &mut InterpCtl) {
    c.result = Some(fail_result_of(c));
    c.phase = IPhase::WriteOut;
    c.out_next = 0;
}

/// One interpreter step: next control state, a bounded group of token writes
/// confined to the window, and the direction of travel.
pub fn interp_step(env: &RuleEnv, ctl: &InterpCtl, win: &dyn TokWindow) -> IStepOut {
    let mut c = ctl.clone();
    let mut writes = Vec::new();
    let mut done = false;
    let mut dir: i8 = 1;
    match c.phase {
        IPhase::PreScan => loop {
            match parse_rule_at(win, c.cursor) {
                RuleParse::Ok(_, len) => c.cursor += len,
                RuleParse::Pad(n) => c.cursor += n,
                RuleParse::End => {
                    c.r_end = c.cursor + 1;
                    c.cursor = c.r_end;
                    c.zeros = 0;
                    c.phase = IPhase::FetchVa;
                    dir = dir_toward(c.cursor, win);
                    break;
                }
                RuleParse::Truncated => {
                    dir = dir_toward(c.cursor, win);
                    break;
                }
                RuleParse::Bad => {
                    if c.r_end == 0 {
                        c.r_end = c.cursor + 1;
                    }
                    fail_to_writeout(&mut c);
                    dir = dir_toward(c.res_base(), win);
                    break;
                }
            }
        },
        IPhase::FetchVa => loop {
            match win.tok(c.cursor) {
                None => {
                    dir = dir_toward(c.cursor, win);
                    break;
                }
                Some(0) if c.cursor == c.r_end + c.zeros && c.zeros < 32 => {
                    c.zeros += 1;
                    c.cursor += 1;
                }
                Some(t) => {
                    let va_off = c.cursor - c.va_base();
                    if va_off < 32 {
                        let w = (va_off / 8) as usize;
                        let sh = 16 * (va_off % 8);
                        c.va_words[w] |= (t as u128) << sh;
                        c.cursor += 1;
                    } else {
                        c.alpha = t != 0;
                        c.cursor = 0;
                        c.phase = IPhase::ToStart;
                        dir = -1;
                        break;
                    }
                }
            }
        },
        IPhase::ToStart => {
            if win.tok(0).is_some() {
                c.phase = IPhase::EvalScan;
                c.cursor = 0;
                dir = 1;
            } else {
                dir = -1;
            }
        }
        IPhase::EvalScan => {
            let lvl = c.zeros.max(1);
            loop {
                match parse_rule_at(win, c.cursor) {
                    RuleParse::Pad(n) => {
                        c.cursor += n;
                        continue;
                    }
                    RuleParse::Ok(rule, len) => {
                        let a = unpack_words(c.va_words[0], c.va_words[1]);
                        let b = unpack_words(c.va_words[2], c.va_words[3]);
                        let (a, b) = match (a, b) {
                            (Some(a), Some(b)) => (a, b),
                            _ => {
                                fail_to_writeout(&mut c);
                                break;
                            }
                        };
                        let inner_env = RuleEnv {
                            k: lvl,
                            params: env.params,
                            g: env.g,
                            r_tokens: env.r_tokens,
                            psi: env.psi,
                        };
                        match rules::eval_single(&rule, &inner_env, (&a, &b), c.alpha) {
                            Ok(Some(out)) => {
                                c.result = Some(result_tokens(&out));
                                c.phase = IPhase::WriteOut;
                                c.out_next = 0;
                                break;
                            }
                            Ok(None) => c.cursor += len,
                            Err(_) => {
                                fail_to_writeout(&mut c);
                                break;
                            }
                        }
                    }
                    RuleParse::End => {
                        fail_to_writeout(&mut c);
                        break;
                    }
                    RuleParse::Truncated => break,
                    RuleParse::Bad => {
                        fail_to_writeout(&mut c);
                        break;
                    }
                }
            }
            dir = if c.phase == IPhase::WriteOut {
                dir_toward(c.res_base(), win)
            } else {
                dir_toward(c.cursor, win)
            };
        }
        IPhase::WriteOut => {
            let base = c.res_base();
            // Write every result token whose slot is visible now.
            while c.out_next < RES_TOKENS {
                let target = base + c.out_next;
                if win.tok(target).is_some() {
                    let val = c
                        .result
                        .as_ref()
                        .map(|r| r[c.out_next as usize])
                        .unwrap_or(0);
                    writes.push((target, val));
                    c.out_next += 1;
                } else {
                    break;
                }
            }
            if c.out_next >= RES_TOKENS {
                c.phase = IPhase::Done;
                done = true;
                dir = 1;
            } else {
                dir = dir_toward(base + c.out_next, win);
            }
        }
        IPhase::Done => {
            done = true;
        }
    }
    IStepOut { ctl: c, writes, dir, done }
}

fn read_ctl(x: &CellSymbol, y: &CellSymbol) -> InterpCtl {
    match (&x.work.regs[5], &y.work.regs[5]) {
        (FieldValue::Ctl(c), _) => (**c).clone(),
        (_, FieldValue::Ctl(c)) => (**c).clone(),
        _ => InterpCtl::start(),
    }
}

/// Operator entry point: projects one component of the kernel step computed
/// from the observed pair.
pub fn interp_op(env: &RuleEnv, x: &CellSymbol, y: &CellSymbol, op: rules::OpCode) -> FieldValue {
    let ctl = read_ctl(x, y);
    let win = PairWindow { x, y, q: env.params.q as i64 };
    let out = interp_step(env, &ctl, &win);
    match op {
        rules::OpCode::InterpCtl => FieldValue::Ctl(Box::new(out.ctl)),
        rules::OpCode::InterpDir => FieldValue::I(out.dir as i64),
        rules::OpCode::InterpDone => FieldValue::I(out.done as i64),
        _ => FieldValue::U,
    }
}

/// The InterpCommit instruction: applies one kernel step to the observed
/// pair — token writes to whichever side owns each slot, and the control
/// state moved in the direction of travel.
pub fn commit_step(
    env: &RuleEnv,
    a0: &CellSymbol,
    b0: &CellSymbol,
    a: &mut CellSymbol,
    b: &mut CellSymbol,
) {
    let ctl = read_ctl(a0, b0);
    let out = {
        let win = PairWindow { x: a0, y: b0, q: env.params.q as i64 };
        interp_step(env, &ctl, &win)
    };
    for (idx, v) in &out.writes {
        for c in [&mut *a, &mut *b] {
            if let Some(base) = cell_tok_base(c, env.params.q as i64) {
                if *idx >= base && *idx < base + TOKENS_PER_CELL {
                    let slot = (*idx - base) as usize;
                    if c.work.toks.len() <= slot {
                        c.work.toks.resize(slot + 1, 0);
                    }
                    c.work.toks[slot] = *v;
                }
            }
        }
    }
    let ctl_val = FieldValue::Ctl(Box::new(out.ctl));
    if out.dir > 0 {
        b.work.regs[5] = ctl_val;
        a.work.regs[5] = FieldValue::U;
    } else {
        a.work.regs[5] = ctl_val;
        b.work.regs[5] = FieldValue::U;
    }
}

/// Counts from a standalone two-stage run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackRun {
    pub a: CellSymbol,
    pub b: CellSymbol,
    pub dir: i8,
    pub ok: bool,
    /// Stage-1 micro-sweeps: one WriteProgramBit execution per R token.
    pub stage1_sweeps: u64,
    pub stage2_steps: u64,
}

impl TrackRun {
    pub fn total_steps(&self) -> u64 {
        self.stage1_sweeps + self.stage2_steps
    }
}

/// Reproduces the two-stage self-simulation on a standalone track: stage 1
/// writes R token by token via WriteProgramBit semantics and appends 0^{k+1}
/// and va; stage 2 runs the interpreter, yielding τ_{R,k+1}(va).
pub fn interpret_on_track(
    env: &RuleEnv,
    k: u32,
    va: (&CellSymbol, &CellSymbol),
    alpha: bool,
) -> Result<TrackRun, RuleError> {
    let rlen = env.r_tokens.len();
    let zeros = (k + 1) as usize;
    let total = rlen + zeros + VA_TOKENS as usize + RES_TOKENS as usize;
    let cells = total.div_ceil(TOKENS_PER_CELL as usize).max(2);
    let mut track = vec![0u16; cells * TOKENS_PER_CELL as usize];
    let mut stage1 = 0u64;
    for (i, &t) in env.r_tokens.iter().enumerate() {
        track[i] = t;
        stage1 += 1;
    }
    let wa = pack_words(va.0).ok_or(RuleError::Parse("va symbol exceeds capacity".into()))?;
    let wb = pack_words(va.1).ok_or(RuleError::Parse("va symbol exceeds capacity".into()))?;
    let va_base = rlen + zeros;
    let mut va_toks = words_to_toks(&wa);
    va_toks.extend(words_to_toks(&wb));
    va_toks.push(alpha as u16);
    track[va_base..va_base + VA_TOKENS as usize].copy_from_slice(&va_toks);

    let mut ctl = InterpCtl::start();
    let mut cell: i64 = 0;
    let mut steps = 0u64;
    let budget = 64 * cells as u64 + 4 * RES_TOKENS as u64 + 64;
    loop {
        let lo = (cell as u32) * TOKENS_PER_CELL;
        let hi = (lo + 2 * TOKENS_PER_CELL).min(track.len() as u32);
        let win = VecWindow { toks: &track, lo, hi };
        let out = interp_step(env, &ctl, &win);
        steps += 1;
        for (idx, v) in &out.writes {
            if (*idx as usize) < track.len() {
                track[*idx as usize] = *v;
            }
        }
        ctl = out.ctl;
        if out.done {
            break;
        }
        cell = (cell + out.dir as i64).clamp(0, cells as i64 - 2);
        if steps > budget {
            return Err(RuleError::Parse("interpreter did not terminate".into()));
        }
    }

    let res_base = va_base + VA_TOKENS as usize;
    let res = &track[res_base..res_base + RES_TOKENS as usize];
    let ok = res[33] == FLAG_OK;
    let word = |i: usize| -> u128 {
        let mut w = 0u128;
        for j in 0..8 {
            w |= (res[i * 8 + j] as u128) << (16 * j);
        }
        w
    };
    let a = unpack_words(word(0), word(1));
    let b = unpack_words(word(2), word(3));
    let dir = if res[32] == 1 { 1 } else { -1 };
    match (a, b) {
        (Some(a), Some(b)) if ok => Ok(TrackRun {
            a,
            b,
            dir,
            ok,
            stage1_sweeps: stage1,
            stage2_steps: steps,
        }),
        _ => Ok(TrackRun {
            a: va.0.clone(),
            b: va.1.clone(),
            dir,
            ok: false,
            stage1_sweeps: stage1,
            stage2_steps: steps,
        }),
    }
}

/// Exact interpreter step count, used by the work-period metrics.
pub fn step_count(
    env: &RuleEnv,
    k: u32,
    va: (&CellSymbol, &CellSymbol),
    alpha: bool,
) -> Result<u64, RuleError> {
    Ok(interpret_on_track(env, k, va, alpha)?.total_steps())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::PsiCode;
    use crate::gmachine::GMachine;
    use crate::params::ParamSet;
    use crate::rules::{Cmp, Cond, Expr, Instr, Operand, PName, RuleProgram, Side};
    use crate::tape::FieldId;

    fn fixture() -> (ParamSet, GMachine, PsiCode) {
        let p = ParamSet::toy();
        let psi = PsiCode::for_params(&p).unwrap();
        (p, GMachine::incrementer(), psi)
    }

    fn motion_prog() -> RuleProgram {
        RuleProgram {
            rules: vec![
                Rule {
                    name: "turn-at-right-end".into(),
                    guard: Cond::Cmp(
                        Expr::Operand(Operand::Field(Side::X, FieldId::Addr)),
                        Cmp::Ge,
                        Expr::Operand(Operand::Param(PName::QMinus1)),
                    ),
                    body: Instr::Seq(vec![
                        Instr::Assign(Side::X, FieldId::Pass, Expr::Operand(Operand::Lit(1))),
                        Instr::Move(Operand::Lit(-1)),
                    ]),
                },
                Rule {
                    name: "walk".into(),
                    guard: Cond::All(vec![]),
                    body: Instr::Seq(vec![
                        Instr::Assign(
                            Side::Y,
                            FieldId::Age,
                            Expr::Add(
                                Operand::Field(Side::X, FieldId::Age),
                                Operand::Param(PName::K),
                            ),
                        ),
                        Instr::Move(Operand::Lit(1)),
                    ]),
                },
            ],
        }
    }

    #[test]
    fn fixed_point_track_equals_eval() {
        let (p, g, psi) = fixture();
        let prog = motion_prog();
        let r = rules::to_tokens(&prog);
        let env = RuleEnv { k: 1, params: &p, g: &g, r_tokens: &r, psi: &psi };
        let env2 = RuleEnv { k: 2, params: &p, g: &g, r_tokens: &r, psi: &psi };
        for addr in [0i64, 7, 15] {
            for age in [0i64, 3] {
                for alpha in [false, true] {
                    let mut x = CellSymbol::blank(Kind::Booting);
                    x.addr = addr;
                    x.age = age;
                    let mut y = CellSymbol::blank(Kind::Booting);
                    y.addr = (addr + 1).min(15);
                    let native = rules::eval(&prog, &env2, (&x, &y), alpha).unwrap();
                    let track = interpret_on_track(&env, 1, (&x, &y), alpha).unwrap();
                    assert!(track.ok, "track run must succeed");
                    assert_eq!(track.a, native.a, "addr={addr} age={age} alpha={alpha}");
                    assert_eq!(track.b, native.b);
                    assert_eq!(track.dir, native.dir);
                }
            }
        }
    }

    #[test]
    fn stage1_sweep_count_is_r_len() {
        let (p, g, psi) = fixture();
        let prog = motion_prog();
        let r = rules::to_tokens(&prog);
        let env = RuleEnv { k: 1, params: &p, g: &g, r_tokens: &r, psi: &psi };
        let x = CellSymbol::blank(Kind::Booting);
        let y = CellSymbol::blank(Kind::Booting);
        let run = interpret_on_track(&env, 1, (&x, &y), true).unwrap();
        assert_eq!(run.stage1_sweeps, r.len() as u64);
    }

    #[test]
    fn single_token_program_prefix() {
        let (p, g, psi) = fixture();
        let prog = RuleProgram { rules: vec![] };
        let r = rules::to_tokens(&prog);
        assert_eq!(r.len(), 1);
        let env = RuleEnv { k: 1, params: &p, g: &g, r_tokens: &r, psi: &psi };
        let x = CellSymbol::blank(Kind::Booting);
        let y = CellSymbol::blank(Kind::Booting);
        let run = interpret_on_track(&env, 1, (&x, &y), true).unwrap();
        assert!(!run.ok, "empty program has no matching rule");
        assert_eq!(run.stage1_sweeps, 1);
    }

    #[test]
    fn corrupted_r_yields_failure_not_crash() {
        let (p, g, psi) = fixture();
        let prog = motion_prog();
        let mut r = rules::to_tokens(&prog);
        r[0] = 999;
        let env = RuleEnv { k: 1, params: &p, g: &g, r_tokens: &r, psi: &psi };
        let x = CellSymbol::blank(Kind::Booting);
        let y = CellSymbol::blank(Kind::Booting);
        let run = interpret_on_track(&env, 1, (&x, &y), true).unwrap();
        assert!(!run.ok);
    }

    #[test]
    fn step_count_grows_modestly_with_level() {
        let (p, g, psi) = fixture();
        let prog = motion_prog();
        let r = rules::to_tokens(&prog);
        let env = RuleEnv { k: 1, params: &p, g: &g, r_tokens: &r, psi: &psi };
        let x = CellSymbol::blank(Kind::Booting);
        let y = CellSymbol::blank(Kind::Booting);
        let c1 = step_count(&env, 1, (&x, &y), true).unwrap();
        let c2 = step_count(&env, 3, (&x, &y), true).unwrap();
        assert!(c1 > 0 && c2 >= c1);
        assert!(c2 - c1 <= 8, "level marker adds a few tokens only");
    }
}
