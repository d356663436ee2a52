//! The simulation work period: a fixed schedule of sweeps over the base
//! colony-pair, with the per-cell Age track recording the last sweep that
//! covered each cell. Between sweeps the head repositions under a
//! sweep-start mark; every turn goes through the small-turn Pass discipline.
//!
//! Sweeps sharing one per-cell action are emitted as a class over a set of
//! sweep indices, with the index recovered from the start mark or the Age
//! track; this keeps the serialized program small enough for the work track.

use crate::params::ParamSet;
use crate::rules::{Cmp, Cond, Expr, Instr, OpCode, Operand, PName, Side};
use crate::tape::{FieldId, Kind, Proc};

use super::build::*;

/// Sweeps in one work period. The drift −1 transfer path uses one more
/// return sweep than drift +1; the period-start rule accepts both endings.
pub const N_SWEEPS: i64 = 38;

pub const W_CLEAR: i64 = 1;
pub const W_NEW0: i64 = 20;
pub const W_WRITER: i64 = 21;
pub const W_J_BASE: i64 = 22;
pub const W_VOTE: i64 = 34;
pub const W_OUTPUT: i64 = 35;
pub const W_T1: i64 = 36;
pub const W_T2: i64 = 37;
pub const W_T3: i64 = 38;

// Flat mode ids. Sweep-start marks are SS_BASE+w and end-of-sweep seeks are
// SEEK_BASE+w, so one generic rule set serves every sweep.
pub const SS_BASE: i64 = 100;
pub const SEEK_BASE: i64 = 200;
pub const SEEK_TO_SS_DELTA: i64 = SEEK_BASE - SS_BASE - 1;
pub const M_INTERP_KICK: i64 = 300;
pub const SEEK_KICK: i64 = 301;
pub const M_T1_GO: i64 = 350;
pub const M_T2P: i64 = 352;
pub const M_T2M: i64 = 353;
pub const SEEK_T1: i64 = 351;
pub const M_TRIP_SCAN_R: i64 = 310;
pub const M_TRIP_OVER_R: i64 = 311;
pub const M_TRIP_SCAN_L: i64 = 312;
pub const M_TRIP_OVER_L: i64 = 313;
pub const SEEK_TRIP_R: i64 = 322;
pub const SEEK_TRIP_L: i64 = 323;
pub const SEEK_T2P_DONE: i64 = 324;
pub const SEEK_T3_DONE: i64 = 325;
pub const SEEK_T3_WRAP: i64 = 326;

pub fn ss_mode(w: i64) -> i64 {
    SS_BASE + w
}

#[derive(Clone, Copy, PartialEq)]
enum Span {
    Pair,
    C0,
    C1,
}

fn in_span(span: Span, s: Side) -> Cond {
    match span {
        Span::Pair => any(vec![kind_is(s, Kind::Member0), kind_is(s, Kind::Member1)]),
        Span::C0 => kind_is(s, Kind::Member0),
        Span::C1 => kind_is(s, Kind::Member1),
    }
}

fn origin_cond(span: Span, rightward: bool, s: Side) -> Cond {
    let (kind, addr) = match (span, rightward) {
        (Span::Pair, true) => (Kind::Member0, lit(0)),
        (Span::Pair, false) => (Kind::Member1, par(PName::QMinus1)),
        (Span::C0, true) => (Kind::Member0, lit(0)),
        (Span::C0, false) => (Kind::Member0, par(PName::QMinus1)),
        (Span::C1, true) => (Kind::Member1, lit(0)),
        (Span::C1, false) => (Kind::Member1, par(PName::QMinus1)),
    };
    all(vec![kind_is(s, kind), eq(f(s, FieldId::Addr), addr)])
}

fn clear_regs_init(s: Side) -> Vec<Instr> {
    vec![Instr::ClearRegs(s)]
}

fn acc_init(s: Side) -> Vec<Instr> {
    vec![setl(s, FieldId::WorkReg(4), 0)]
}

fn no_init(_s: Side) -> Vec<Instr> {
    vec![]
}

fn carry_regs(from: Side, to: Side) -> Vec<Instr> {
    if from == to {
        vec![]
    } else {
        vec![Instr::CarryRegs(from, to)]
    }
}

fn clear_regs(s: Side) -> Vec<Instr> {
    vec![Instr::ClearRegs(s)]
}

fn age_in(s: Side, ws: &[i64]) -> Cond {
    any(ws.iter().map(|&w| eq(f(s, FieldId::Age), lit(w))).collect())
}

fn mode_in_ss(s: Side, ws: &[i64]) -> Cond {
    any(ws
        .iter()
        .map(|&w| eq(f(s, FieldId::WorkMode), lit(ss_mode(w))))
        .collect())
}

/// One class of sweeps: same span and per-cell action, several indices.
struct ClassDef {
    name: String,
    span: Span,
    ws: Vec<i64>,
    action: Box<dyn Fn(Side, Side) -> Vec<Instr>>,
    init: fn(Side) -> Vec<Instr>,
    ss_extra: Vec<(String, Cond, Instr)>,
    /// Flat seek mode overriding the generic next-sweep turn.
    special_seek: Option<i64>,
}

/// Walk rules moving a sweep-start mark toward the sweep's origin cell.
/// Direction is decided locally: within the member kinds by address order,
/// outside them by following the drift home.
fn emit_ss_walk(e: &mut Emitter, name: &str, ws: &[i64], span: Span, rightward: bool) {
    use FieldId::*;
    let (okind, oaddr_is_zero) = match (span, rightward) {
        (Span::Pair, true) => (Kind::Member0, true),
        (Span::Pair, false) => (Kind::Member1, false),
        (Span::C0, true) => (Kind::Member0, true),
        (Span::C0, false) => (Kind::Member0, false),
        (Span::C1, true) => (Kind::Member1, true),
        (Span::C1, false) => (Kind::Member1, false),
    };
    let other = if okind == Kind::Member0 {
        Kind::Member1
    } else {
        Kind::Member0
    };
    // Direction toward the origin from x's point of view.
    let toward_other: i64 = if okind == Kind::Member0 { -1 } else { 1 };
    let dir_cond_right = if oaddr_is_zero {
        // Same kind: always approach from the right (origin at addr 0).
        all(vec![kind_is(Side::X, other)])
    } else {
        any(vec![
            all(vec![
                kind_is(Side::X, okind),
                ltx(fe(Side::X, Addr), pe(PName::QMinus1)),
            ]),
            kind_is(Side::X, other),
        ])
    };
    let moves_right = |same_kind_right: bool| -> Cond {
        let mut opts = Vec::new();
        if same_kind_right {
            if oaddr_is_zero {
                // never rightward within the kind
            } else {
                opts.push(all(vec![
                    kind_is(Side::X, okind),
                    ltx(fe(Side::X, Addr), pe(PName::QMinus1)),
                ]));
            }
        }
        if toward_other > 0 {
            opts.push(kind_is(Side::X, other));
        }
        // Outside the pair: follow drift +1.
        opts.push(all(vec![
            not(kind_is(Side::X, okind)),
            not(kind_is(Side::X, other)),
            eq(f(Side::X, Drift), lit(1)),
        ]));
        any(opts)
    };
    let _ = dir_cond_right;
    let right_cond = moves_right(true);
    for mark_on in [Side::X, Side::Y] {
        let step = |to_dir: i64| -> Instr {
            let target = if to_dir > 0 { Side::Y } else { Side::X };
            let mut v = vec![set(target, WorkMode, fe(mark_on, WorkMode))];
            v.extend(carry_regs(mark_on, target));
            if mark_on != target {
                v.push(clear(mark_on, WorkMode));
            }
            v.push(setl(if to_dir > 0 { Side::X } else { Side::Y }, Pass, 0));
            v.push(mv(to_dir));
            seq(v)
        };
        e.rule(
            &format!("{}-ss-{}", name, if mark_on == Side::X { "x" } else { "y" }),
            mode_in_ss(mark_on, ws),
            iff(right_cond.clone(), step(1), step(-1)),
        );
    }
}

fn emit_classes(e: &mut Emitter, mut classes: Vec<ClassDef>) {
    // Later sweeps first: at a seam pair where two sweeps' rules both match,
    // the newer sweep must win.
    classes.sort_by_key(|c| std::cmp::Reverse(c.ws.iter().copied().max().unwrap_or(0)));
    // One start-mark walk rule set per (span, direction), over the union of
    // the matching sweep indices.
    let mut walk_groups: std::collections::BTreeMap<(u8, bool), Vec<i64>> =
        std::collections::BTreeMap::new();
    for c in &classes {
        for &w in &c.ws {
            let span_code = match c.span {
                Span::Pair => 0u8,
                Span::C0 => 1,
                Span::C1 => 2,
            };
            walk_groups
                .entry((span_code, w % 2 == 1))
                .or_default()
                .push(w);
        }
    }
    for c in classes {
        emit_class(e, c);
    }
    for ((span_code, rightward), ws) in walk_groups {
        let span = match span_code {
            0 => Span::Pair,
            1 => Span::C0,
            _ => Span::C1,
        };
        let name = format!(
            "walk-{}-{}",
            match span {
                Span::Pair => "pair",
                Span::C0 => "c0",
                Span::C1 => "c1",
            },
            if rightward { "r" } else { "l" }
        );
        emit_ss_walk(e, &name, &ws, span, rightward);
    }
}

fn emit_class(e: &mut Emitter, c: ClassDef) {
    let odd: Vec<i64> = c.ws.iter().copied().filter(|w| w % 2 == 1).collect();
    let even: Vec<i64> = c.ws.iter().copied().filter(|w| w % 2 == 0).collect();

    for (name, guard, body) in &c.ss_extra {
        let modes = any(vec![mode_in_ss(Side::X, &c.ws), mode_in_ss(Side::Y, &c.ws)]);
        e.rule(name, all(vec![modes, guard.clone()]), body.clone());
    }

    for (ws, rightward) in [(&odd, true), (&even, false)] {
        if ws.is_empty() {
            continue;
        }
        let tag = if rightward { "r" } else { "l" };

        // Arrival: cover the origin cell so it stays visible as the sweep's
        // carrier after the move. Rightward sweeps catch the origin as y
        // (the start-mark walk passes it heading left); leftward sweeps
        // catch it as x after walking beyond the span's right end.
        let origin_side = if rightward { Side::Y } else { Side::X };
        let off_side = if rightward { Side::X } else { Side::Y };
        let from_mode = |fld: FieldId| {
            iff(
                Cond::Defined(Side::X, FieldId::WorkMode),
                set(
                    origin_side,
                    fld,
                    Expr::Sub(f(Side::X, FieldId::WorkMode), lit(SS_BASE)),
                ),
                set(
                    origin_side,
                    fld,
                    Expr::Sub(f(Side::Y, FieldId::WorkMode), lit(SS_BASE)),
                ),
            )
        };
        let mut arrive = vec![from_mode(FieldId::Age), from_mode(FieldId::Sweep)];
        arrive.push(clear(Side::X, FieldId::WorkMode));
        arrive.push(clear(Side::Y, FieldId::WorkMode));
        arrive.push(clear(Side::X, FieldId::Index));
        arrive.push(clear(Side::Y, FieldId::Index));
        // A neighbor freshly created by the walk becomes stem filler.
        arrive.push(when(
            kind_is(off_side, Kind::New),
            seq(vec![
                setl(off_side, FieldId::KindF, Kind::Stem.code()),
                setl(off_side, FieldId::Drift, if rightward { 1 } else { -1 }),
                setl(off_side, FieldId::Addr, 0),
                setl(off_side, FieldId::ProcF, Proc::Simulate.code()),
                set(off_side, FieldId::PayloadTape, Expr::Op(OpCode::BlankSeg, off_side, vec![])),
            ]),
        ));
        arrive.extend((c.init)(origin_side));
        arrive.extend((c.action)(origin_side, origin_side));
        arrive.push(mv(if rightward { 1 } else { -1 }));
        e.rule(
            &format!("{}-{}-begin", c.name, tag),
            all(vec![
                any(vec![mode_in_ss(Side::X, ws), mode_in_ss(Side::Y, ws)]),
                origin_cond(c.span, rightward, origin_side),
                proc_is(origin_side, Proc::Simulate),
            ]),
            seq(arrive),
        );

        let (covered, carrier) = if rightward {
            (Side::Y, Side::X)
        } else {
            (Side::X, Side::Y)
        };
        let mut body = carry_regs(carrier, covered);
        body.extend((c.action)(covered, carrier));
        body.push(set(covered, FieldId::Age, fe(carrier, FieldId::Age)));
        body.push(set(covered, FieldId::Sweep, fe(carrier, FieldId::Age)));
        body.extend(clear_regs(carrier));
        body.push(mv(if rightward { 1 } else { -1 }));
        e.rule(
            &format!("{}-{}-adv", c.name, tag),
            all(vec![
                proc_is(carrier, Proc::Simulate),
                no_mode(Side::X),
                no_mode(Side::Y),
                age_in(carrier, ws),
                in_span(c.span, carrier),
                in_span(c.span, covered),
                if c.ws.contains(&W_CLEAR) {
                    nex(fe(covered, FieldId::Age), fe(carrier, FieldId::Age))
                } else {
                    ltx(fe(covered, FieldId::Age), fe(carrier, FieldId::Age))
                },
            ]),
            seq(body),
        );

        let seek_mode_expr = match c.special_seek {
            Some(m) => le(m),
            None => Expr::Add(f(carrier, FieldId::Age), lit(SEEK_BASE)),
        };
        e.rule(
            &format!("{}-{}-end", c.name, tag),
            all(vec![
                proc_is(carrier, Proc::Simulate),
                no_mode(Side::X),
                no_mode(Side::Y),
                age_in(carrier, ws),
                in_span(c.span, carrier),
                not(in_span(c.span, covered)),
            ]),
            seek_entry_expr(if rightward { 1 } else { -1 }, seek_mode_expr, c.special_seek),
        );
    }
}

/// Inline first step of a turn seek with a computed mode. On an immediate
/// turn the follow-up mode is the seek's turn target.
fn seek_entry_expr(travel: i64, mode: Expr, special: Option<i64>) -> Instr {
    let target = match special {
        Some(m) => le(special_turn_target(m)),
        None => match &mode {
            Expr::Add(a, _) => Expr::Sub(a.clone(), lit(-(SEEK_BASE) + SEEK_TO_SS_DELTA - SEEK_BASE)),
            _ => mode.clone(),
        },
    };
    // Generic case: mode = Age + SEEK_BASE, target = Age + SEEK_BASE − 99.
    let target = match special {
        Some(m) => le(special_turn_target(m)),
        None => match &mode {
            Expr::Add(a, _) => Expr::Add(a.clone(), lit(SEEK_BASE - SEEK_TO_SS_DELTA)),
            _ => target,
        },
    };
    if travel > 0 {
        iff(
            eq(f(Side::Y, FieldId::Pass), lit(1)),
            seq(vec![
                set(Side::Y, FieldId::WorkMode, mode.clone()),
                setl(Side::Y, FieldId::Index, 1),
                Instr::CarryRegs(Side::X, Side::Y),
                setl(Side::X, FieldId::Pass, 0),
                mv(1),
            ]),
            seq(vec![
                setl(Side::Y, FieldId::Pass, 1),
                setl(Side::X, FieldId::Pass, 0),
                set(Side::X, FieldId::WorkMode, target),
                mv(-1),
            ]),
        )
    } else {
        iff(
            eq(f(Side::X, FieldId::Pass), lit(-1)),
            seq(vec![
                set(Side::X, FieldId::WorkMode, mode.clone()),
                setl(Side::X, FieldId::Index, 1),
                Instr::CarryRegs(Side::Y, Side::X),
                setl(Side::Y, FieldId::Pass, 0),
                mv(-1),
            ]),
            seq(vec![
                setl(Side::X, FieldId::Pass, -1),
                setl(Side::Y, FieldId::Pass, 0),
                set(Side::Y, FieldId::WorkMode, target),
                mv(1),
            ]),
        )
    }
}

fn special_turn_target(seek: i64) -> i64 {
    match seek {
        SEEK_KICK => M_INTERP_KICK,
        SEEK_T1 => M_T1_GO,
        SEEK_TRIP_R => M_T2P,
        SEEK_TRIP_L => M_T2M,
        SEEK_T2P_DONE => ss_mode(W_CLEAR),
        SEEK_T3_DONE => ss_mode(W_T3),
        SEEK_T3_WRAP => ss_mode(W_CLEAR),
        m => m - SEEK_TO_SS_DELTA,
    }
}

fn mode_parity(s: Side, parity: i64) -> Cond {
    eqx(Expr::Mod(f(s, FieldId::WorkMode), lit(2)), le(parity))
}

/// Generic rules shared by every sweep: the start-mark walk and the
/// SEEK_BASE-family turn seek.
pub fn emit_generic_motion(e: &mut Emitter) {
    use FieldId::*;
    use Side::{X, Y};

    let seek_range = |s: Side| {
        all(vec![
            gex(fe(s, WorkMode), le(SEEK_BASE)),
            ltx(fe(s, WorkMode), le(SEEK_BASE + 64)),
        ])
    };
    e.rule(
        "seek-r-blocked",
        all(vec![
            seek_range(X),
            mode_parity(X, 1),
            eq(f(Y, Pass), lit(1)),
            lt(f(X, Index), par(PName::SmallStarve)),
        ]),
        seq(vec![
            set(Y, WorkMode, fe(X, WorkMode)),
            set(Y, Index, Expr::Add(f(X, Index), lit(1))),
            Instr::CarryRegs(X, Y),
            clear(X, WorkMode),
            clear(X, Index),
            setl(X, Pass, 0),
            mv(1),
        ]),
    );
    e.rule(
        "seek-r-turn",
        all(vec![seek_range(X), mode_parity(X, 1), ne(f(Y, Pass), lit(1))]),
        seq(vec![
            setl(Y, Pass, 1),
            setl(X, Pass, 0),
            set(X, WorkMode, Expr::Sub(f(X, WorkMode), lit(SEEK_TO_SS_DELTA))),
            clear(X, Index),
            mv(-1),
        ]),
    );
    e.rule(
        "seek-l-blocked",
        all(vec![
            seek_range(Y),
            mode_parity(Y, 0),
            eq(f(X, Pass), lit(-1)),
            lt(f(Y, Index), par(PName::SmallStarve)),
        ]),
        seq(vec![
            set(X, WorkMode, fe(Y, WorkMode)),
            set(X, Index, Expr::Add(f(Y, Index), lit(1))),
            Instr::CarryRegs(Y, X),
            clear(Y, WorkMode),
            clear(Y, Index),
            setl(Y, Pass, 0),
            mv(-1),
        ]),
    );
    e.rule(
        "seek-l-turn",
        all(vec![seek_range(Y), mode_parity(Y, 0), ne(f(X, Pass), lit(-1))]),
        seq(vec![
            setl(X, Pass, -1),
            setl(Y, Pass, 0),
            set(Y, WorkMode, Expr::Sub(f(Y, WorkMode), lit(SEEK_TO_SS_DELTA))),
            clear(Y, Index),
            mv(1),
        ]),
    );
}

fn interior(s: Side) -> Cond {
    all(vec![
        gex(fe(s, FieldId::Addr), pe(PName::PadLen)),
        ltx(fe(s, FieldId::Addr), pe(PName::IntEnd)),
    ])
}

fn pos0(s: Side) -> Cond {
    eqx(
        Expr::Mod(f(s, FieldId::Addr), lit(2)),
        Expr::Mod(Operand::Param(PName::PadLen), lit(2)),
    )
}

fn bm_update(covered: Side, carrier: Side, cand: u8, cnt: u8) -> Instr {
    let candf = FieldId::WorkReg(cand);
    let cntf = FieldId::WorkReg(cnt);
    iff(
        any(vec![
            eq(f(carrier, cntf), lit(0)),
            not(Cond::Defined(carrier, cntf)),
        ]),
        seq(vec![
            set(covered, candf, fe(covered, FieldId::InfoF)),
            setl(covered, cntf, 1),
        ]),
        iff(
            eq(f(covered, FieldId::InfoF), f(carrier, candf)),
            set(covered, cntf, Expr::Add(f(carrier, cntf), lit(1))),
            set(covered, cntf, Expr::Sub(f(carrier, cntf), lit(1))),
        ),
    )
}

fn bm_action(covered: Side, carrier: Side) -> Vec<Instr> {
    vec![when(
        interior(covered),
        iff(
            pos0(covered),
            bm_update(covered, carrier, 0, 1),
            bm_update(covered, carrier, 2, 3),
        ),
    )]
}

/// Guard: the covered cell owns the work-track cell index held in `cellp`.
fn at_track_cell(s: Side, cellp: PName) -> Cond {
    any(vec![
        all(vec![
            ltx(pe(cellp), pe(PName::Q)),
            kind_is(s, Kind::Member0),
            eqx(fe(s, FieldId::Addr), pe(cellp)),
        ]),
        all(vec![
            gex(pe(cellp), pe(PName::Q)),
            kind_is(s, Kind::Member1),
            eqx(fe(s, FieldId::Addr), Expr::Sub(par(cellp), par(PName::Q))),
        ]),
    ])
}

fn defined(e: Expr) -> Cond {
    Cond::Cmp(e, Cmp::Ne, Expr::Operand(Operand::Undef))
}

pub fn emit_mode_procedures(e: &mut Emitter, _p: &ParamSet) {
    e.rule(
        "interp-kick",
        any(vec![
            mode_is(Side::X, M_INTERP_KICK),
            mode_is(Side::Y, M_INTERP_KICK),
        ]),
        seq(vec![
            clear(Side::X, FieldId::WorkMode),
            clear(Side::Y, FieldId::WorkMode),
            clear(Side::X, FieldId::Index),
            clear(Side::Y, FieldId::Index),
            Instr::InterpCommit,
            iff(
                eqx(Expr::Op(OpCode::InterpDir, Side::X, vec![]), le(-1)),
                mv(-1),
                mv(1),
            ),
        ]),
    );
    let kick = SeekSpec {
        name: "seek-kick".into(),
        mode: SEEK_KICK,
        travel: -1,
        on_turn: vec![setl(Side::Y, FieldId::WorkMode, M_INTERP_KICK)],
    };
    emit_seek(e, &kick);

    e.rule(
        "interp-step",
        all(vec![
            any(vec![
                Cond::Defined(Side::X, FieldId::WorkReg(5)),
                Cond::Defined(Side::Y, FieldId::WorkReg(5)),
            ]),
            not(Cond::Pred(OpCode::InterpDone, Side::X, vec![])),
        ]),
        seq(vec![
            Instr::InterpCommit,
            iff(
                eqx(Expr::Op(OpCode::InterpDir, Side::X, vec![]), le(-1)),
                mv(-1),
                mv(1),
            ),
        ]),
    );
    for j in 0..3i64 {
        let w_e1 = W_J_BASE + 4 * j + 3;
        e.rule(
            &format!("interp-done-j{}", j + 1),
            all(vec![
                any(vec![
                    Cond::Defined(Side::X, FieldId::WorkReg(5)),
                    Cond::Defined(Side::Y, FieldId::WorkReg(5)),
                ]),
                Cond::Pred(OpCode::InterpDone, Side::X, vec![]),
                any(vec![
                    eq(f(Side::X, FieldId::Age), lit(w_e1 - 1)),
                    eq(f(Side::Y, FieldId::Age), lit(w_e1 - 1)),
                ]),
            ]),
            seq(vec![
                clear(Side::X, FieldId::WorkReg(5)),
                clear(Side::Y, FieldId::WorkReg(5)),
                setl(Side::X, FieldId::WorkMode, ss_mode(w_e1)),
                mv(-1),
            ]),
        );
    }
}

pub fn emit_simulate(e: &mut Emitter, p: &ParamSet) {
    let mut classes: Vec<ClassDef> = Vec::new();
    e.rule(
        "sim-bootstrap",
        all(vec![
            proc_is(Side::X, Proc::Simulate),
            no_mode(Side::X),
            no_mode(Side::Y),
            any(vec![
                kind_is(Side::X, Kind::Member0),
                kind_is(Side::X, Kind::Member1),
            ]),
            eq(f(Side::X, FieldId::Age), lit(0)),
            eq(f(Side::Y, FieldId::Age), lit(0)),
            not(Cond::Defined(Side::X, FieldId::WorkReg(5))),
            not(Cond::Defined(Side::Y, FieldId::WorkReg(5))),
        ]),
        seq(vec![setl(Side::X, FieldId::WorkMode, ss_mode(W_CLEAR)), mv(-1)]),
    );

    classes.push(
        ClassDef {
            name: "clear".into(),
            span: Span::Pair,
            ws: vec![W_CLEAR],
            action: Box::new(|c, _k| {
                let mut v = Vec::new();
                for j in 0..3 {
                    v.push(clear(c, FieldId::HoldInfo(j)));
                    v.push(clear(c, FieldId::HoldDrift(j)));
                    v.push(clear(c, FieldId::HoldReplace(j)));
                    v.push(clear(c, FieldId::Compliant(j)));
                }
                v.push(clear(c, FieldId::Index));
                v
            }),
            init: clear_regs_init,
            ss_extra: vec![],
            special_seek: None,
        },
    );

    classes.push(
        ClassDef {
            name: "bm-c1".into(),
            span: Span::C1,
            ws: vec![2, 5, 8],
            action: Box::new(bm_action),
            init: clear_regs_init,
            ss_extra: vec![],
            special_seek: None,
        },
    );
    let acc_action = || -> Box<dyn Fn(Side, Side) -> Vec<Instr>> {
        Box::new(|c, k| {
            vec![when(
                interior(c),
                set(
                    c,
                    FieldId::WorkReg(4),
                    Expr::Op(
                        OpCode::ComplyAcc,
                        c,
                        vec![
                            f(k, FieldId::WorkReg(4)),
                            f(k, FieldId::WorkReg(0)),
                            f(k, FieldId::WorkReg(2)),
                        ],
                    ),
                ),
            )]
        })
    };
    classes.push(
        ClassDef {
            name: "acc-c1".into(),
            span: Span::C1,
            ws: vec![3, 6, 9],
            action: acc_action(),
            init: acc_init,
            ss_extra: vec![],
            special_seek: None,
        },
    );
    classes.push(
        ClassDef {
            name: "bm-c0".into(),
            span: Span::C0,
            ws: vec![11, 14, 17, 23, 27, 31],
            action: Box::new(bm_action),
            init: clear_regs_init,
            ss_extra: vec![],
            special_seek: None,
        },
    );
    classes.push(
        ClassDef {
            name: "acc-c0".into(),
            span: Span::C0,
            ws: vec![12, 15, 18],
            action: acc_action(),
            init: acc_init,
            ss_extra: vec![],
            special_seek: None,
        },
    );
    for (w, colony, span, j) in [
        (4i64, "c1-j1", Span::C1, 0u8),
        (7, "c1-j2", Span::C1, 1),
        (10, "c1-j3", Span::C1, 2),
        (13, "c0-j1", Span::C0, 0),
        (16, "c0-j2", Span::C0, 1),
        (19, "c0-j3", Span::C0, 2),
    ] {
        classes.push(
            ClassDef {
                name: format!("comply-wr-{colony}"),
                span,
                ws: vec![w],
                action: Box::new(move |c, k| {
                    vec![set(
                        c,
                        FieldId::Compliant(j),
                        Expr::Op(OpCode::ComplyOk, c, vec![f(k, FieldId::WorkReg(4))]),
                    )]
                }),
                init: no_init,
                ss_extra: vec![],
                special_seek: None,
            },
        );
    }

    classes.push(
        ClassDef {
            name: "new0".into(),
            span: Span::Pair,
            ws: vec![W_NEW0],
            action: Box::new(|c, _k| {
                vec![when(
                    eqx(Expr::Op(OpCode::MajCompliant, c, vec![]), le(0)),
                    set(
                        c,
                        FieldId::InfoF,
                        Expr::Op(OpCode::PsiNewSymAt, c, vec![lit(0)]),
                    ),
                )]
            }),
            init: no_init,
            ss_extra: vec![],
            special_seek: None,
        },
    );

    classes.push(
        ClassDef {
            name: "writer".into(),
            span: Span::Pair,
            ws: vec![W_WRITER],
            action: Box::new(|c, _k| vec![Instr::WriteProgramCell(c)]),
            init: no_init,
            ss_extra: vec![],
            special_seek: None,
        },
    );

    classes.push(
        ClassDef {
            name: "dec-c1".into(),
            span: Span::Pair,
            ws: vec![22, 26, 30],
            action: Box::new(|c, k| {
                vec![
                    when(
                        all(vec![kind_is(c, Kind::Member1), interior(c)]),
                        iff(pos0(c), bm_update(c, k, 0, 1), bm_update(c, k, 2, 3)),
                    ),
                    when(
                        all(vec![
                            kind_is(c, Kind::Member0),
                            eq(f(c, FieldId::Addr), par(PName::QMinus1)),
                        ]),
                        iff(
                            Cond::Adjacent,
                            setl(c, FieldId::WorkReg(4), 1),
                            setl(c, FieldId::WorkReg(4), 0),
                        ),
                    ),
                    when(
                        any(vec![
                            at_track_cell(c, PName::VaCellA),
                            at_track_cell(c, PName::VaCellB),
                        ]),
                        seq(vec![
                            Instr::StoreWords(
                                c,
                                par(PName::VaSymB),
                                vec![f(k, FieldId::WorkReg(0)), f(k, FieldId::WorkReg(2))],
                            ),
                            Instr::WriteTokAt(
                                c,
                                par(PName::VaAlpha),
                                Expr::Operand(f(k, FieldId::WorkReg(4))),
                            ),
                        ]),
                    ),
                ]
            }),
            init: clear_regs_init,
            ss_extra: vec![],
            special_seek: None,
        },
    );
    classes.push(
        ClassDef {
            name: "dec-store".into(),
            span: Span::C0,
            ws: vec![24, 28, 32],
            action: Box::new(|c, k| {
                vec![when(
                    any(vec![
                        at_track_cell(c, PName::VaCellA),
                        at_track_cell(c, PName::VaCellB),
                    ]),
                    Instr::StoreWords(
                        c,
                        par(PName::VaBase),
                        vec![f(k, FieldId::WorkReg(0)), f(k, FieldId::WorkReg(2))],
                    ),
                )]
            }),
            init: no_init,
            ss_extra: vec![],
            special_seek: Some(SEEK_KICK),
        },
    );

    for j in 0..3i64 {
        let w_e1 = W_J_BASE + 4 * j + 3;
        let jj = j as u8;
        classes.push(
            ClassDef {
                name: format!("encode-j{}", j + 1),
                span: Span::Pair,
                ws: vec![w_e1],
                action: Box::new(move |c, k| {
                    let w_c0 = vec![f(k, FieldId::WorkReg(0)), f(k, FieldId::WorkReg(1))];
                    let w_c1 = vec![f(k, FieldId::WorkReg(2)), f(k, FieldId::WorkReg(3))];
                    vec![
                        iff(
                            kind_is(c, Kind::Member0),
                            set(c, FieldId::HoldInfo(jj), Expr::Op(OpCode::PsiSymAt, c, w_c0)),
                            set(c, FieldId::HoldInfo(jj), Expr::Op(OpCode::PsiSymAt, c, w_c1)),
                        ),
                        when(
                            kind_is(c, Kind::Member0),
                            iff(
                                eq(f(k, FieldId::WorkReg(4)), lit(1)),
                                setl(c, FieldId::HoldDrift(jj), 1),
                                setl(c, FieldId::HoldDrift(jj), -1),
                            ),
                        ),
                        when(
                            Cond::Defined(k, FieldId::WorkReg(5)),
                            set(c, FieldId::HoldReplace(jj), fe(k, FieldId::WorkReg(5))),
                        ),
                    ]
                }),
                init: no_init,
                ss_extra: vec![(
                    format!("encode-j{}-load", j + 1),
                    at_track_cell(Side::X, PName::ResCellA),
                    seq(vec![
                        set(
                            Side::X,
                            FieldId::WorkReg(0),
                            Expr::Op(OpCode::LoadWord, Side::X, vec![par(PName::ResBase), lit(0)]),
                        ),
                        set(
                            Side::X,
                            FieldId::WorkReg(1),
                            Expr::Op(OpCode::LoadWord, Side::X, vec![par(PName::ResBase), lit(8)]),
                        ),
                        set(
                            Side::X,
                            FieldId::WorkReg(2),
                            Expr::Op(OpCode::LoadWord, Side::X, vec![par(PName::ResBase), lit(16)]),
                        ),
                        set(
                            Side::X,
                            FieldId::WorkReg(3),
                            Expr::Op(OpCode::LoadWord, Side::X, vec![par(PName::ResBase), lit(24)]),
                        ),
                        seto(
                            Side::X,
                            FieldId::WorkReg(4),
                            Operand::Tok(Side::X, Box::new(par(PName::ResDir))),
                        ),
                        set(
                            Side::X,
                            FieldId::WorkReg(5),
                            Expr::Op(
                                OpCode::ExtractReplace,
                                Side::X,
                                vec![
                                    f(Side::X, FieldId::WorkReg(0)),
                                    f(Side::X, FieldId::WorkReg(1)),
                                    f(Side::X, FieldId::WorkReg(2)),
                                    f(Side::X, FieldId::WorkReg(3)),
                                    f(Side::X, FieldId::WorkReg(4)),
                                ],
                            ),
                        ),
                        setl(Side::X, FieldId::WorkMode, ss_mode(w_e1)),
                        clear(Side::Y, FieldId::WorkMode),
                        mv(-1),
                    ]),
                )],
                special_seek: None,
            },
        );
    }

    classes.push(
        ClassDef {
            name: "vote".into(),
            span: Span::Pair,
            ws: vec![W_VOTE],
            action: Box::new(|c, _k| {
                let mut v = vec![
                    set(c, FieldId::InfoF, Expr::Op(OpCode::MajHoldInfo, c, vec![])),
                    set(c, FieldId::Drift, Expr::Op(OpCode::MajHoldDrift, c, vec![])),
                    set(c, FieldId::Replace, Expr::Op(OpCode::MajHoldReplace, c, vec![])),
                ];
                for (kind, r0, r1) in [(Kind::Member0, 0u8, 1u8), (Kind::Member1, 2, 3)] {
                    v.push(when(
                        all(vec![
                            kind_is(c, kind),
                            eq(f(c, FieldId::Addr), par(PName::PadLen)),
                        ]),
                        set(c, FieldId::WorkReg(r0), Expr::Op(OpCode::MajHoldInfo, c, vec![])),
                    ));
                    v.push(when(
                        all(vec![
                            kind_is(c, kind),
                            eqx(fe(c, FieldId::Addr), Expr::Add(par(PName::PadLen), lit(1))),
                        ]),
                        set(c, FieldId::WorkReg(r1), Expr::Op(OpCode::MajHoldInfo, c, vec![])),
                    ));
                }
                v
            }),
            init: clear_regs_init,
            ss_extra: vec![],
            special_seek: None,
        },
    );

    classes.push(
        ClassDef {
            name: "output".into(),
            span: Span::Pair,
            ws: vec![W_OUTPUT],
            action: Box::new(|c, k| {
                let mut v = Vec::new();
                for (kind, r0, r1) in [(Kind::Member0, 0u8, 1u8), (Kind::Member1, 2, 3)] {
                    let ext = Expr::Op(
                        OpCode::ExtractOutput,
                        c,
                        vec![f(k, FieldId::WorkReg(r0)), f(k, FieldId::WorkReg(r1))],
                    );
                    v.push(when(
                        all(vec![
                            kind_is(c, kind),
                            eq(f(c, FieldId::Addr), lit(0)),
                            defined(ext.clone()),
                        ]),
                        set(c, FieldId::Output, ext),
                    ));
                }
                v
            }),
            init: no_init,
            ss_extra: vec![],
            special_seek: Some(SEEK_T1),
        },
    );

    // Transfer rules precede the compute classes: their age guards (the
    // transfer sweep indices) are unambiguous, and a transfer in progress
    // must outrank the seam-matching end rules of the compute sweeps.
    let t1seek = SeekSpec {
        name: "seek-t1".into(),
        mode: SEEK_T1,
        travel: 1,
        on_turn: vec![setl(Side::X, FieldId::WorkMode, M_T1_GO)],
    };
    emit_seek(e, &t1seek);
    emit_transfer(e, p);

    emit_classes(e, classes);
}

/// The transfer phase: move the base pair one colony in the voted drift
/// direction, building a fresh colony (code of new_0) when no neighbor
/// exists, with the overshoot walk before the final turn.
fn emit_transfer(e: &mut Emitter, _p: &ParamSet) {
    use FieldId::*;
    use Side::{X, Y};

    let drift_is = |s: Side, d: i64| eq(f(s, Drift), lit(d));

    e.rule(
        "t1p-begin",
        all(vec![
            any(vec![mode_is(X, M_T1_GO), mode_is(Y, M_T1_GO)]),
            drift_is(Y, 1),
            kind_is(Y, Kind::Member0),
            eq(f(Y, Addr), lit(0)),
        ]),
        seq(vec![
            clear(X, WorkMode),
            clear(Y, WorkMode),
            setl(Y, KindF, Kind::Outer.code()),
            setl(Y, Drift, 1),
            setl(Y, Age, W_T1),
            setl(Y, Sweep, W_T1),
            mv(1),
        ]),
    );
    e.rule(
        "t1m-begin",
        all(vec![
            any(vec![mode_is(X, M_T1_GO), mode_is(Y, M_T1_GO)]),
            drift_is(X, -1),
            kind_is(X, Kind::Member1),
            eq(f(X, Addr), par(PName::QMinus1)),
        ]),
        seq(vec![
            clear(X, WorkMode),
            clear(Y, WorkMode),
            setl(X, KindF, Kind::Outer.code()),
            setl(X, Drift, -1),
            setl(X, Age, W_T1),
            setl(X, Sweep, W_T1),
            mv(-1),
        ]),
    );

    // Walk to the transfer origin: members know the voted drift; outside
    // the pair the local drift points home.
    let member = |s: Side| any(vec![kind_is(s, Kind::Member0), kind_is(s, Kind::Member1)]);
    let go_step = |d: i64, mark_on: Side| -> Instr {
        let target = if d > 0 { Y } else { X };
        let mut v = vec![setl(target, WorkMode, M_T1_GO)];
        if mark_on != target {
            v.push(clear(mark_on, WorkMode));
        }
        v.push(setl(if d > 0 { X } else { Y }, Pass, 0));
        v.push(mv(d));
        seq(v)
    };
    for mark_on in [X, Y] {
        let tag = if mark_on == X { "x" } else { "y" };
        e.rule(
            &format!("t1-go-left-{tag}"),
            all(vec![
                mode_is(mark_on, M_T1_GO),
                any(vec![
                    all(vec![member(X), drift_is(X, 1)]),
                    all(vec![not(member(X)), member(Y), drift_is(Y, 1)]),
                ]),
            ]),
            go_step(-1, mark_on),
        );
        e.rule(
            &format!("t1-go-right-{tag}"),
            all(vec![
                mode_is(mark_on, M_T1_GO),
                any(vec![
                    all(vec![member(X), drift_is(X, -1)]),
                    all(vec![not(member(X)), member(Y), drift_is(Y, -1)]),
                ]),
            ]),
            go_step(1, mark_on),
        );
        e.rule(
            &format!("t1-go-home-{tag}"),
            mode_is(mark_on, M_T1_GO),
            iff(
                eq(f(X, Drift), lit(-1)),
                go_step(-1, mark_on),
                go_step(1, mark_on),
            ),
        );
    }
    e.rule(
        "t1p-adv",
        all(vec![
            drift_is(X, 1),
            no_mode(X),
            no_mode(Y),
            eq(f(X, Age), lit(W_T1)),
            any(vec![kind_is(Y, Kind::Member0), kind_is(Y, Kind::Member1)]),
            lt(f(Y, Age), lit(W_T1)),
            any(vec![
                kind_is(X, Kind::Outer),
                kind_is(X, Kind::Member0),
                kind_is(X, Kind::Bridge),
            ]),
        ]),
        seq(vec![
            iff(
                kind_is(Y, Kind::Member0),
                seq(vec![setl(Y, KindF, Kind::Outer.code()), setl(Y, Drift, 1)]),
                setl(Y, KindF, Kind::Member0.code()),
            ),
            setl(Y, Age, W_T1),
            setl(Y, Sweep, W_T1),
            mv(1),
        ]),
    );
    e.rule(
        "t1p-claim",
        all(vec![
            no_mode(X),
            eq(f(X, Age), lit(W_T1)),
            any(vec![kind_is(Y, Kind::New), kind_is(Y, Kind::Stem)]),
            any(vec![kind_is(X, Kind::Member0), kind_is(X, Kind::Bridge)]),
        ]),
        seq(vec![
            setl(Y, KindF, Kind::Bridge.code()),
            addr_inc_from(X, Y),
            setl(Y, Drift, -1),
            setl(Y, Pass, 0),
            setl(Y, Sweep, W_T1),
            setl(Y, Age, W_T1),
            setl(Y, ProcF, Proc::Simulate.code()),
            set(Y, PayloadTape, Expr::Op(OpCode::BlankSeg, Y, vec![])),
            set(
                Y,
                InfoF,
                Expr::Op(OpCode::PsiNewSymAt, Y, vec![lit(0), f(X, Addr), lit(1)]),
            ),
            when(
                eqx(fe(X, Addr), Expr::Sub(par(PName::Q), lit(2))),
                seq(vec![
                    setl(Y, WorkMode, M_TRIP_OVER_R),
                    seto(Y, Index, par(PName::Overshoot)),
                ]),
            ),
            mv(1),
        ]),
    );
    e.rule(
        "t1p-adv-bridge",
        all(vec![
            no_mode(X),
            no_mode(Y),
            eq(f(X, Age), lit(W_T1)),
            kind_is(Y, Kind::Bridge),
            lt(f(Y, Age), lit(W_T1)),
        ]),
        seq(vec![
            set(Y, InfoF, Expr::Op(OpCode::PsiNewSymAt, Y, vec![lit(0)])),
            setl(Y, Age, W_T1),
            setl(Y, Sweep, W_T1),
            iff(
                eq(f(Y, Addr), par(PName::QMinus1)),
                seq(vec![
                    setl(Y, WorkMode, M_TRIP_OVER_R),
                    seto(Y, Index, par(PName::Overshoot)),
                ]),
                Instr::Nop,
            ),
            mv(1),
        ]),
    );
    e.rule(
        "t1p-reach-outer",
        all(vec![
            no_mode(X),
            no_mode(Y),
            eq(f(X, Age), lit(W_T1)),
            kind_is(Y, Kind::Outer),
            eq(f(Y, Addr), lit(0)),
        ]),
        seq(vec![setl(Y, WorkMode, M_TRIP_SCAN_R), mv(1)]),
    );
    e.rule(
        "trip-scan-r-done",
        all(vec![
            mode_is(X, M_TRIP_SCAN_R),
            eq(f(X, Addr), par(PName::QMinus1)),
        ]),
        seq(vec![
            clear(X, WorkMode),
            setl(Y, WorkMode, M_TRIP_OVER_R),
            seto(Y, Index, par(PName::Overshoot)),
            mv(1),
        ]),
    );
    e.rule(
        "trip-scan-r",
        mode_is(X, M_TRIP_SCAN_R),
        seq(vec![
            setl(Y, WorkMode, M_TRIP_SCAN_R),
            clear(X, WorkMode),
            setl(X, Pass, 0),
            mv(1),
        ]),
    );
    e.rule(
        "trip-over-r-claim",
        all(vec![
            mode_is(X, M_TRIP_OVER_R),
            kind_is(Y, Kind::New),
            gt(f(X, Index), lit(0)),
        ]),
        seq(vec![
            setl(Y, KindF, Kind::Stem.code()),
            setl(Y, Drift, -1),
            setl(Y, Addr, 0),
            setl(Y, ProcF, Proc::Simulate.code()),
            set(Y, PayloadTape, Expr::Op(OpCode::BlankSeg, Y, vec![])),
            setl(Y, Pass, 0),
            setl(Y, Sweep, 0),
            setl(Y, Age, 0),
            setl(Y, WorkMode, M_TRIP_OVER_R),
            set(Y, Index, Expr::Sub(f(X, Index), lit(1))),
            clear(X, WorkMode),
            clear(X, Index),
            mv(1),
        ]),
    );
    let t2_entry = SeekSpec {
        name: "t1p-over-turn".into(),
        mode: SEEK_TRIP_R,
        travel: 1,
        on_turn: vec![setl(X, WorkMode, M_T2P)],
    };
    emit_seek(e, &t2_entry);
    e.rule(
        "trip-over-r-end",
        all(vec![mode_is(X, M_TRIP_OVER_R), eq(f(X, Index), lit(0))]),
        seek_entry(&t2_entry),
    );
    e.rule(
        "trip-over-r",
        mode_is(X, M_TRIP_OVER_R),
        seq(vec![
            setl(Y, WorkMode, M_TRIP_OVER_R),
            set(Y, Index, Expr::Sub(f(X, Index), lit(1))),
            clear(X, WorkMode),
            clear(X, Index),
            setl(X, Pass, 0),
            mv(1),
        ]),
    );

    e.rule(
        "t2p-begin",
        all(vec![
            any(vec![mode_is(X, M_T2P), mode_is(Y, M_T2P)]),
            any(vec![kind_is(X, Kind::Bridge), kind_is(X, Kind::Outer)]),
            eq(f(X, Addr), par(PName::QMinus1)),
        ]),
        seq(vec![
            clear(X, WorkMode),
            clear(Y, WorkMode),
            setl(X, KindF, Kind::Member1.code()),
            setl(X, Drift, 1),
            setl(X, Age, W_T2),
            setl(X, Sweep, W_T2),
            mv(-1),
        ]),
    );
    for mark_on in [X, Y] {
        let mut body = vec![setl(X, WorkMode, M_T2P)];
        if mark_on == Y {
            body.push(clear(Y, WorkMode));
        }
        body.push(setl(Y, Pass, 0));
        body.push(mv(-1));
        e.rule(
            &format!("t2p-ss-{}", if mark_on == X { "x" } else { "y" }),
            mode_is(mark_on, M_T2P),
            seq(body),
        );
    }
    e.rule(
        "t2p-adv-promote",
        all(vec![

            no_mode(X),
            no_mode(Y),
            eq(f(Y, Age), lit(W_T2)),
            lt(f(X, Age), lit(W_T2)),
            any(vec![kind_is(X, Kind::Bridge), kind_is(X, Kind::Outer)]),
            kind_is(Y, Kind::Member1),
        ]),
        seq(vec![
            setl(X, KindF, Kind::Member1.code()),
            setl(X, Drift, 1),
            setl(X, Age, W_T2),
            setl(X, Sweep, W_T2),
            mv(-1),
        ]),
    );
    e.rule(
        "t2p-adv-member",
        all(vec![

            no_mode(X),
            no_mode(Y),
            eq(f(Y, Age), lit(W_T2)),
            lt(f(X, Age), lit(W_T2)),
            kind_is(X, Kind::Member0),
        ]),
        seq(vec![setl(X, Age, W_T2), setl(X, Sweep, W_T2), mv(-1)]),
    );
    let t2_done = SeekSpec {
        name: "t2p-done-seek".into(),
        mode: SEEK_T2P_DONE,
        travel: -1,
        on_turn: vec![setl(Y, WorkMode, ss_mode(W_CLEAR))],
    };
    emit_seek(e, &t2_done);
    e.rule(
        "t2p-done",
        all(vec![

            no_mode(X),
            no_mode(Y),
            eq(f(Y, Age), lit(W_T2)),
            kind_is(Y, Kind::Member0),
            eq(f(Y, Addr), lit(0)),
            not(any(vec![kind_is(X, Kind::Member0), kind_is(X, Kind::Bridge)])),
        ]),
        seek_entry(&t2_done),
    );

    // drift −1 mirror.
    e.rule(
        "t1m-adv",
        all(vec![
            drift_is(Y, -1),
            no_mode(X),
            no_mode(Y),
            eq(f(Y, Age), lit(W_T1)),
            any(vec![kind_is(X, Kind::Member0), kind_is(X, Kind::Member1)]),
            lt(f(X, Age), lit(W_T1)),
            any(vec![
                kind_is(Y, Kind::Outer),
                kind_is(Y, Kind::Member1),
                kind_is(Y, Kind::Bridge),
            ]),
        ]),
        seq(vec![
            iff(
                kind_is(X, Kind::Member1),
                seq(vec![setl(X, KindF, Kind::Outer.code()), setl(X, Drift, -1)]),
                setl(X, KindF, Kind::Member1.code()),
            ),
            setl(X, Age, W_T1),
            setl(X, Sweep, W_T1),
            mv(-1),
        ]),
    );
    e.rule(
        "t1m-claim",
        all(vec![
            no_mode(Y),
            eq(f(Y, Age), lit(W_T1)),
            any(vec![kind_is(X, Kind::New), kind_is(X, Kind::Stem)]),
            any(vec![kind_is(Y, Kind::Member1), kind_is(Y, Kind::Bridge)]),
        ]),
        seq(vec![
            setl(X, KindF, Kind::Bridge.code()),
            addr_dec_from(Y, X),
            setl(X, Drift, 1),
            setl(X, Pass, 0),
            setl(X, Sweep, W_T1),
            setl(X, Age, W_T1),
            setl(X, ProcF, Proc::Simulate.code()),
            set(X, PayloadTape, Expr::Op(OpCode::BlankSeg, X, vec![])),
            set(
                X,
                InfoF,
                Expr::Op(OpCode::PsiNewSymAt, X, vec![lit(0), f(Y, Addr), lit(-1)]),
            ),
            when(
                eq(f(Y, Addr), lit(1)),
                seq(vec![
                    setl(X, WorkMode, M_TRIP_OVER_L),
                    seto(X, Index, par(PName::Overshoot)),
                ]),
            ),
            mv(-1),
        ]),
    );
    e.rule(
        "t1m-adv-bridge",
        all(vec![
            no_mode(X),
            no_mode(Y),
            eq(f(Y, Age), lit(W_T1)),
            kind_is(X, Kind::Bridge),
            lt(f(X, Age), lit(W_T1)),
        ]),
        seq(vec![
            set(X, InfoF, Expr::Op(OpCode::PsiNewSymAt, X, vec![lit(0)])),
            setl(X, Age, W_T1),
            setl(X, Sweep, W_T1),
            iff(
                eq(f(X, Addr), lit(0)),
                seq(vec![
                    setl(X, WorkMode, M_TRIP_OVER_L),
                    seto(X, Index, par(PName::Overshoot)),
                ]),
                Instr::Nop,
            ),
            mv(-1),
        ]),
    );
    e.rule(
        "t1m-reach-outer",
        all(vec![
            no_mode(X),
            no_mode(Y),
            eq(f(Y, Age), lit(W_T1)),
            kind_is(X, Kind::Outer),
            eq(f(X, Addr), par(PName::QMinus1)),
        ]),
        seq(vec![setl(X, WorkMode, M_TRIP_SCAN_L), mv(-1)]),
    );
    e.rule(
        "trip-scan-l-done",
        all(vec![mode_is(Y, M_TRIP_SCAN_L), eq(f(Y, Addr), lit(0))]),
        seq(vec![
            clear(Y, WorkMode),
            setl(X, WorkMode, M_TRIP_OVER_L),
            seto(X, Index, par(PName::Overshoot)),
            mv(-1),
        ]),
    );
    e.rule(
        "trip-scan-l",
        mode_is(Y, M_TRIP_SCAN_L),
        seq(vec![
            setl(X, WorkMode, M_TRIP_SCAN_L),
            clear(Y, WorkMode),
            setl(Y, Pass, 0),
            mv(-1),
        ]),
    );
    e.rule(
        "trip-over-l-claim",
        all(vec![
            mode_is(Y, M_TRIP_OVER_L),
            kind_is(X, Kind::New),
            gt(f(Y, Index), lit(0)),
        ]),
        seq(vec![
            setl(X, KindF, Kind::Stem.code()),
            setl(X, Drift, 1),
            setl(X, Addr, 0),
            setl(X, ProcF, Proc::Simulate.code()),
            set(X, PayloadTape, Expr::Op(OpCode::BlankSeg, X, vec![])),
            setl(X, Pass, 0),
            setl(X, Sweep, 0),
            setl(X, Age, 0),
            setl(X, WorkMode, M_TRIP_OVER_L),
            set(X, Index, Expr::Sub(f(Y, Index), lit(1))),
            clear(Y, WorkMode),
            clear(Y, Index),
            mv(-1),
        ]),
    );
    let t2m_entry = SeekSpec {
        name: "t1m-over-turn".into(),
        mode: SEEK_TRIP_L,
        travel: -1,
        on_turn: vec![setl(Y, WorkMode, M_T2M)],
    };
    emit_seek(e, &t2m_entry);
    e.rule(
        "trip-over-l-end",
        all(vec![mode_is(Y, M_TRIP_OVER_L), eq(f(Y, Index), lit(0))]),
        seek_entry(&t2m_entry),
    );
    e.rule(
        "trip-over-l",
        mode_is(Y, M_TRIP_OVER_L),
        seq(vec![
            setl(X, WorkMode, M_TRIP_OVER_L),
            set(X, Index, Expr::Sub(f(Y, Index), lit(1))),
            clear(Y, WorkMode),
            clear(Y, Index),
            setl(Y, Pass, 0),
            mv(-1),
        ]),
    );
    e.rule(
        "t2m-begin",
        all(vec![
            any(vec![mode_is(X, M_T2M), mode_is(Y, M_T2M)]),
            any(vec![kind_is(Y, Kind::Bridge), kind_is(Y, Kind::Outer)]),
            eq(f(Y, Addr), lit(0)),
        ]),
        seq(vec![
            clear(X, WorkMode),
            clear(Y, WorkMode),
            setl(Y, KindF, Kind::Member0.code()),
            setl(Y, Drift, -1),
            setl(Y, Age, W_T2),
            setl(Y, Sweep, W_T2),
            mv(1),
        ]),
    );
    for mark_on in [X, Y] {
        let mut body = vec![setl(Y, WorkMode, M_T2M)];
        if mark_on == X {
            body.push(clear(X, WorkMode));
        }
        body.push(setl(X, Pass, 0));
        body.push(mv(1));
        e.rule(
            &format!("t2m-ss-{}", if mark_on == X { "x" } else { "y" }),
            mode_is(mark_on, M_T2M),
            seq(body),
        );
    }
    e.rule(
        "t2m-adv-promote",
        all(vec![

            no_mode(X),
            no_mode(Y),
            eq(f(X, Age), lit(W_T2)),
            lt(f(Y, Age), lit(W_T2)),
            any(vec![kind_is(Y, Kind::Bridge), kind_is(Y, Kind::Outer)]),
            kind_is(X, Kind::Member0),
        ]),
        seq(vec![
            setl(Y, KindF, Kind::Member0.code()),
            setl(Y, Drift, -1),
            setl(Y, Age, W_T2),
            setl(Y, Sweep, W_T2),
            mv(1),
        ]),
    );
    e.rule(
        "t2m-adv-member",
        all(vec![

            no_mode(X),
            no_mode(Y),
            eq(f(X, Age), lit(W_T2)),
            lt(f(Y, Age), lit(W_T2)),
            kind_is(Y, Kind::Member1),
        ]),
        seq(vec![setl(Y, Age, W_T2), setl(Y, Sweep, W_T2), mv(1)]),
    );
    let t3_entry = SeekSpec {
        name: "t2m-done-seek".into(),
        mode: SEEK_T3_DONE,
        travel: 1,
        on_turn: vec![setl(X, WorkMode, ss_mode(W_T3))],
    };
    emit_seek(e, &t3_entry);
    e.rule(
        "t2m-done",
        all(vec![

            no_mode(X),
            no_mode(Y),
            eq(f(X, Age), lit(W_T2)),
            kind_is(X, Kind::Member1),
            eq(f(X, Addr), par(PName::QMinus1)),
            not(any(vec![kind_is(Y, Kind::Member1), kind_is(Y, Kind::Bridge)])),
        ]),
        seek_entry(&t3_entry),
    );

    let t3wrap = SeekSpec {
        name: "seek-t3-wrap".into(),
        mode: SEEK_T3_WRAP,
        travel: -1,
        on_turn: vec![setl(Y, WorkMode, ss_mode(W_CLEAR))],
    };
    emit_seek(e, &t3wrap);
    emit_classes(
        e,
        vec![ClassDef {
            name: "t3".into(),
            span: Span::Pair,
            ws: vec![W_T3],
            action: Box::new(|_c, _k| vec![]),
            init: no_init,
            ss_extra: vec![],
            special_seek: Some(SEEK_T3_WRAP),
        }],
    );
}
