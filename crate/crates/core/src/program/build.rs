//! Rule emitters for the machine program.
//!
//! The program is assembled top-down: mode-carrying procedures (turn seek,
//! zigzag, the interpreter cursor, the program-string writer), booting,
//! the simulation work period driven by the per-cell Age/Sweep tracks,
//! transfer, healing and rebuilding, and a drift-following default. Rules
//! fire first-match, so ordering here is part of the semantics.

use crate::gmachine::GMachine;
use crate::params::ParamSet;
use crate::rules::{Cmp, Cond, Expr, Instr, OpCode, Operand, PName, Rule, RuleProgram, Side};
use crate::tape::{FieldId, Kind, Proc};

use super::MachineProgram;

// ---- small DSL helpers ----------------------------------------------------

pub(crate) fn f(s: Side, id: FieldId) -> Operand {
    Operand::Field(s, id)
}

pub(crate) fn fe(s: Side, id: FieldId) -> Expr {
    Expr::Operand(Operand::Field(s, id))
}

pub(crate) fn lit(v: i64) -> Operand {
    Operand::Lit(v)
}

pub(crate) fn le(v: i64) -> Expr {
    Expr::Operand(Operand::Lit(v))
}

pub(crate) fn par(p: PName) -> Operand {
    Operand::Param(p)
}

pub(crate) fn pe(p: PName) -> Expr {
    Expr::Operand(Operand::Param(p))
}

pub(crate) fn ex(o: Operand) -> Expr {
    Expr::Operand(o)
}

pub(crate) fn eqx(a: Expr, b: Expr) -> Cond {
    Cond::Cmp(a, Cmp::Eq, b)
}

pub(crate) fn eq(a: Operand, b: Operand) -> Cond {
    eqx(ex(a), ex(b))
}

pub(crate) fn nex(a: Expr, b: Expr) -> Cond {
    Cond::Cmp(a, Cmp::Ne, b)
}

pub(crate) fn ne(a: Operand, b: Operand) -> Cond {
    nex(ex(a), ex(b))
}

pub(crate) fn ltx(a: Expr, b: Expr) -> Cond {
    Cond::Cmp(a, Cmp::Lt, b)
}

pub(crate) fn lt(a: Operand, b: Operand) -> Cond {
    ltx(ex(a), ex(b))
}

pub(crate) fn gex(a: Expr, b: Expr) -> Cond {
    Cond::Cmp(a, Cmp::Ge, b)
}

pub(crate) fn ge(a: Operand, b: Operand) -> Cond {
    gex(ex(a), ex(b))
}

pub(crate) fn gt(a: Operand, b: Operand) -> Cond {
    Cond::Cmp(ex(a), Cmp::Gt, ex(b))
}

pub(crate) fn all(cs: Vec<Cond>) -> Cond {
    Cond::All(cs)
}

pub(crate) fn any(cs: Vec<Cond>) -> Cond {
    Cond::Any(cs)
}

pub(crate) fn not(c: Cond) -> Cond {
    Cond::Not(Box::new(c))
}

pub(crate) fn set(s: Side, id: FieldId, e: Expr) -> Instr {
    Instr::Assign(s, id, e)
}

pub(crate) fn seto(s: Side, id: FieldId, o: Operand) -> Instr {
    Instr::Assign(s, id, Expr::Operand(o))
}

pub(crate) fn setl(s: Side, id: FieldId, v: i64) -> Instr {
    seto(s, id, lit(v))
}

pub(crate) fn clear(s: Side, id: FieldId) -> Instr {
    seto(s, id, Operand::Undef)
}

pub(crate) fn mv(d: i64) -> Instr {
    Instr::Move(lit(d))
}

pub(crate) fn seq(is: Vec<Instr>) -> Instr {
    Instr::Seq(is)
}

pub(crate) fn iff(c: Cond, t: Instr, e: Instr) -> Instr {
    Instr::If(c, Box::new(t), Box::new(e))
}

pub(crate) fn when(c: Cond, t: Instr) -> Instr {
    iff(c, t, Instr::Nop)
}

pub(crate) fn op(code: OpCode, s: Side, args: Vec<Operand>) -> Expr {
    Expr::Op(code, s, args)
}

pub(crate) fn kind_is(s: Side, k: Kind) -> Cond {
    eq(f(s, FieldId::KindF), lit(k.code()))
}

pub(crate) fn proc_is(s: Side, p: Proc) -> Cond {
    eq(f(s, FieldId::ProcF), lit(p.code()))
}

pub(crate) fn mode_is(s: Side, m: i64) -> Cond {
    eq(f(s, FieldId::WorkMode), lit(m))
}

pub(crate) fn no_mode(s: Side) -> Cond {
    not(Cond::Defined(s, FieldId::WorkMode))
}

pub(crate) fn inc(s: Side, id: FieldId) -> Instr {
    set(s, id, Expr::Add(f(s, id), lit(1)))
}

/// addr := (src.addr + 1) mod Q written to dst.
pub(crate) fn addr_inc_from(src: Side, dst: Side) -> Instr {
    iff(
        eq(f(src, FieldId::Addr), par(PName::QMinus1)),
        setl(dst, FieldId::Addr, 0),
        set(dst, FieldId::Addr, Expr::Add(f(src, FieldId::Addr), lit(1))),
    )
}

/// addr := (src.addr − 1) mod Q written to dst.
pub(crate) fn addr_dec_from(src: Side, dst: Side) -> Instr {
    iff(
        eq(f(src, FieldId::Addr), lit(0)),
        seto(dst, FieldId::Addr, par(PName::QMinus1)),
        set(dst, FieldId::Addr, Expr::Sub(f(src, FieldId::Addr), lit(1))),
    )
}

pub struct Emitter {
    pub rules: Vec<Rule>,
}

impl Emitter {
    pub fn rule(&mut self, name: &str, guard: Cond, body: Instr) {
        self.rules.push(Rule {
            name: name.to_string(),
            guard,
            body,
        });
    }
}

// ---- turn seek (the small-turn Pass discipline) ----------------------------

pub(crate) struct SeekSpec {
    pub name: String,
    pub mode: i64,
    /// Direction of travel while seeking (the turn reverses it).
    pub travel: i64,
    /// Extra instructions at the turn (mark placement for the follow-up
    /// mode); the reversal move is appended automatically.
    pub on_turn: Vec<Instr>,
}

/// Emits the two rules of one seek id. Travel +1: the candidate is y and the
/// blocking mark is Pass=+1; travel −1 mirrors with x and Pass=−1. The
/// passed-over cell's Pass resets to 0; starvation is handled by the alarm
/// layer (a seek whose Index reaches the bound no longer matches here).
pub(crate) fn emit_seek(e: &mut Emitter, s: &SeekSpec) {
    let m = s.mode;
    if s.travel > 0 {
        e.rule(
            &format!("{}-blocked", s.name),
            all(vec![
                mode_is(Side::X, m),
                eq(f(Side::Y, FieldId::Pass), lit(1)),
                lt(f(Side::X, FieldId::Index), par(PName::SmallStarve)),
            ]),
            seq(vec![
                setl(Side::Y, FieldId::WorkMode, m),
                set(Side::Y, FieldId::Index, Expr::Add(f(Side::X, FieldId::Index), lit(1))),
                clear(Side::X, FieldId::WorkMode),
                clear(Side::X, FieldId::Index),
                setl(Side::X, FieldId::Pass, 0),
                mv(1),
            ]),
        );
        let mut body = vec![
            setl(Side::Y, FieldId::Pass, 1),
            setl(Side::X, FieldId::Pass, 0),
            clear(Side::X, FieldId::WorkMode),
            clear(Side::X, FieldId::Index),
        ];
        body.extend(s.on_turn.clone());
        body.push(mv(-1));
        e.rule(
            &format!("{}-turn", s.name),
            all(vec![mode_is(Side::X, m), ne(f(Side::Y, FieldId::Pass), lit(1))]),
            seq(body),
        );
    } else {
        e.rule(
            &format!("{}-blocked", s.name),
            all(vec![
                mode_is(Side::Y, m),
                eq(f(Side::X, FieldId::Pass), lit(-1)),
                lt(f(Side::Y, FieldId::Index), par(PName::SmallStarve)),
            ]),
            seq(vec![
                setl(Side::X, FieldId::WorkMode, m),
                set(Side::X, FieldId::Index, Expr::Add(f(Side::Y, FieldId::Index), lit(1))),
                clear(Side::Y, FieldId::WorkMode),
                clear(Side::Y, FieldId::Index),
                setl(Side::Y, FieldId::Pass, 0),
                mv(-1),
            ]),
        );
        let mut body = vec![
            setl(Side::X, FieldId::Pass, -1),
            setl(Side::Y, FieldId::Pass, 0),
            clear(Side::Y, FieldId::WorkMode),
            clear(Side::Y, FieldId::Index),
        ];
        body.extend(s.on_turn.clone());
        body.push(mv(1));
        e.rule(
            &format!("{}-turn", s.name),
            all(vec![mode_is(Side::Y, m), ne(f(Side::X, FieldId::Pass), lit(-1))]),
            seq(body),
        );
    }
}

/// The first step of a seek, inlined at the point where a procedure wants
/// to turn: either turn immediately (candidate unmarked) or start traveling
/// with the seek mark.
pub(crate) fn seek_entry(s: &SeekSpec) -> Instr {
    if s.travel > 0 {
        let mut turn = vec![
            setl(Side::Y, FieldId::Pass, 1),
            setl(Side::X, FieldId::Pass, 0),
        ];
        turn.extend(s.on_turn.clone());
        turn.push(mv(-1));
        let blocked = vec![
            setl(Side::Y, FieldId::WorkMode, s.mode),
            setl(Side::Y, FieldId::Index, 1),
            setl(Side::X, FieldId::Pass, 0),
            mv(1),
        ];
        iff(
            eq(f(Side::Y, FieldId::Pass), lit(1)),
            seq(blocked),
            seq(turn),
        )
    } else {
        let mut turn = vec![
            setl(Side::X, FieldId::Pass, -1),
            setl(Side::Y, FieldId::Pass, 0),
        ];
        turn.extend(s.on_turn.clone());
        turn.push(mv(1));
        let blocked = vec![
            setl(Side::X, FieldId::WorkMode, s.mode),
            setl(Side::X, FieldId::Index, 1),
            setl(Side::Y, FieldId::Pass, 0),
            mv(-1),
        ];
        iff(
            eq(f(Side::X, FieldId::Pass), lit(-1)),
            seq(blocked),
            seq(turn),
        )
    }
}

// ---- booting ----------------------------------------------------------------

fn budget() -> Operand {
    par(PName::PayloadBudget)
}

fn emit_boot(e: &mut Emitter) {
    use FieldId::*;
    use Side::*;

    e.rule(
        "boot-claim-new-right",
        all(vec![kind_is(Y, Kind::New), kind_is(X, Kind::Booting), proc_is(X, Proc::Boot)]),
        seq(vec![
            setl(Y, KindF, Kind::Booting.code()),
            setl(Y, ProcF, Proc::Boot.code()),
            addr_inc_from(X, Y),
            set(Y, Age, fe(X, Age)),
            setl(Y, Sweep, 0),
            setl(Y, Drift, -1),
            setl(Y, Pass, 0),
            set(Y, PayloadTape, op(OpCode::BlankSeg, Y, vec![])),
            mv(-1),
        ]),
    );
    e.rule(
        "boot-claim-new-left",
        all(vec![kind_is(X, Kind::New), kind_is(Y, Kind::Booting), proc_is(Y, Proc::Boot)]),
        seq(vec![
            setl(X, KindF, Kind::Booting.code()),
            setl(X, ProcF, Proc::Boot.code()),
            addr_dec_from(Y, X),
            set(X, Age, fe(Y, Age)),
            setl(X, Sweep, 0),
            setl(X, Drift, 1),
            setl(X, Pass, 0),
            set(X, PayloadTape, op(OpCode::BlankSeg, X, vec![])),
            mv(1),
        ]),
    );
    e.rule(
        "boot-claim-stem-right",
        all(vec![
            kind_is(Y, Kind::Stem),
            kind_is(X, Kind::Booting),
            proc_is(X, Proc::Boot),
            no_mode(X),
        ]),
        seq(vec![
            setl(Y, KindF, Kind::Booting.code()),
            setl(Y, ProcF, Proc::Boot.code()),
            addr_inc_from(X, Y),
            set(Y, Age, fe(X, Age)),
            setl(Y, Drift, -1),
            set(Y, PayloadTape, op(OpCode::BlankSeg, Y, vec![])),
            mv(-1),
        ]),
    );
    e.rule(
        "boot-claim-stem-left",
        all(vec![
            kind_is(X, Kind::Stem),
            kind_is(Y, Kind::Booting),
            proc_is(Y, Proc::Boot),
            no_mode(Y),
        ]),
        seq(vec![
            setl(X, KindF, Kind::Booting.code()),
            setl(X, ProcF, Proc::Boot.code()),
            addr_dec_from(Y, X),
            set(X, Age, fe(Y, Age)),
            setl(X, Drift, 1),
            set(X, PayloadTape, op(OpCode::BlankSeg, X, vec![])),
            mv(1),
        ]),
    );

    let g_head_visible = any(vec![
        Cond::Defined(X, PayloadPosF),
        Cond::Defined(Y, PayloadPosF),
    ]);
    let booting_pair = all(vec![
        kind_is(X, Kind::Booting),
        kind_is(Y, Kind::Booting),
        proc_is(X, Proc::Boot),
        no_mode(X),
        no_mode(Y),
    ]);

    // One payload action (G): the window kernel with the level budget; both
    // sides' segments and the head written back, emits recorded on the pair,
    // the action counter bumped, then the head drifts after G.
    let dir_hint = || op(OpCode::GDirHint, X, vec![budget()]);
    e.rule(
        "boot-gstep",
        all(vec![
            booting_pair.clone(),
            g_head_visible.clone(),
            lt(f(X, Age), par(PName::Q)),
            Cond::Pred(OpCode::GSteps, X, vec![budget()]),
        ]),
        seq(vec![
            set(X, PayloadTape, op(OpCode::GTapeAfter, X, vec![budget()])),
            set(Y, PayloadTape, op(OpCode::GTapeAfter, Y, vec![budget()])),
            set(X, PayloadPosF, op(OpCode::GPosAfter, X, vec![budget()])),
            set(Y, PayloadPosF, op(OpCode::GPosAfter, Y, vec![budget()])),
            when(
                Cond::Pred(OpCode::GEmitted, X, vec![budget()]),
                seq(vec![
                    set(X, Output, op(OpCode::GEmitVal, X, vec![budget()])),
                    set(Y, Output, op(OpCode::GEmitVal, Y, vec![budget()])),
                ]),
            ),
            inc(X, Age),
            inc(Y, Age),
            iff(
                eqx(dir_hint(), le(-1)),
                mv(-1),
                iff(
                    eqx(dir_hint(), le(1)),
                    mv(1),
                    iff(eqx(Expr::Mod(f(X, Age), lit(2)), le(0)), mv(1), mv(-1)),
                ),
            ),
        ]),
    );

    // Blocked at the window edge: reposition toward the head, still
    // consuming a processing action.
    e.rule(
        "boot-gstuck",
        all(vec![
            booting_pair.clone(),
            g_head_visible,
            lt(f(X, Age), par(PName::Q)),
        ]),
        seq(vec![
            inc(X, Age),
            inc(Y, Age),
            iff(gex(dir_hint(), le(1)), mv(1), mv(-1)),
        ]),
    );

    // Head not over the G cells: walk toward the fresher side.
    e.rule(
        "boot-find-g",
        all(vec![booting_pair, lt(f(X, Age), par(PName::Q))]),
        seq(vec![
            setl(Y, Pass, 0),
            iff(gt(f(Y, Age), f(X, Age)), mv(1), mv(-1)),
        ]),
    );
}

// ---- default ----------------------------------------------------------------

fn emit_default(e: &mut Emitter) {
    use FieldId::*;
    use Side::*;
    e.rule(
        "default-follow-drift",
        Cond::All(vec![]),
        seq(vec![
            setl(Y, Pass, 0),
            iff(eq(f(X, Drift), lit(-1)), mv(-1), mv(1)),
        ]),
    );
}

// ---- assembly -----------------------------------------------------------------

pub fn build_program(params: ParamSet, g: GMachine) -> MachineProgram {
    let psi = crate::codes::PsiCode::for_params(&params).expect("params must fit the psi code");
    let mut e = Emitter { rules: Vec::new() };

    super::simulate::emit_mode_procedures(&mut e, &params);
    emit_boot(&mut e);
    super::simulate::emit_simulate(&mut e, &params);
    // Generic motion comes after the stage rules so that sweep arrivals
    // outrank the walks.
    super::simulate::emit_generic_motion(&mut e);
    emit_default(&mut e);

    let prog = RuleProgram { rules: e.rules };
    let r_tokens = crate::rules::to_tokens(&prog);
    for r in &prog.rules {
        let one = RuleProgram { rules: vec![r.clone()] };
        let toks = crate::rules::to_tokens(&one);
        assert!(
            toks.len() - 1 <= crate::interp::MAX_RULE_TOKENS,
            "rule '{}' serializes to {} tokens (max {})",
            r.name,
            toks.len() - 1,
            crate::interp::MAX_RULE_TOKENS
        );
    }
    MachineProgram {
        params,
        g,
        psi,
        prog,
        r_tokens,
        n_sweeps: super::simulate::N_SWEEPS,
    }
}
