//! The target machine G: a table-driven Turing machine carried on the
//! payload track. One shared window kernel implements G-steps both for the
//! rule evaluator (simulated levels) and for the colony-track choreography,
//! so the two paths agree bit-exactly.

use crate::tape::{GSym, PayloadPos};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// G tape symbols inside a payload: None = blank, Some(0)/Some(1) = bits,
/// Some(2) = the left-end marker.
pub const G_MARK: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GAction {
    pub write: u8,
    pub dir: i8,
    pub next: u8,
    pub emit: Option<u16>,
}

/// Transition table of G, keyed by (state, observed symbol).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GMachine {
    pub name: String,
    pub n_states: u8,
    pub table: BTreeMap<(u8, Option<u8>), GAction>,
}

impl GMachine {
    /// The unary incrementer: scans right over ones, appends a one, returns
    /// to the end marker and emits there, then repeats. Emits land on the
    /// marker cell, G's position 0.
    pub fn incrementer() -> GMachine {
        let mut table = BTreeMap::new();
        let a = 0u8;
        let b = 1u8;
        table.insert(
            (a, Some(G_MARK)),
            GAction { write: G_MARK, dir: 1, next: a, emit: None },
        );
        table.insert((a, Some(1)), GAction { write: 1, dir: 1, next: a, emit: None });
        table.insert((a, None), GAction { write: 1, dir: -1, next: b, emit: None });
        table.insert((b, Some(1)), GAction { write: 1, dir: -1, next: b, emit: None });
        table.insert(
            (b, Some(G_MARK)),
            GAction { write: G_MARK, dir: 1, next: a, emit: Some(1) },
        );
        GMachine {
            name: "unary-incrementer".into(),
            n_states: 2,
            table,
        }
    }

    pub fn action(&self, state: u8, sym: GSym) -> Option<GAction> {
        self.table.get(&(state, sym)).copied()
    }
}

/// Builds the initial G tape for input 1^n: marker followed by n ones.
pub fn unary_input_tape(n: usize) -> Vec<GSym> {
    let mut t = vec![Some(G_MARK)];
    t.extend(std::iter::repeat(Some(1)).take(n));
    t
}

/// Result of running G on an unbounded tape until its first emit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub value: u16,
    pub steps: u64,
    pub tape: BTreeMap<i64, u8>,
    pub head: i64,
    pub state: u8,
}

/// Native oracle: runs G from tape (cell 0 = first entry) and head position
/// `head0` until the first emit, or None within `max_steps`.
pub fn oracle_first_output(
    g: &GMachine,
    tape0: &[GSym],
    head0: i64,
    state0: u8,
    max_steps: u64,
) -> Option<OracleResult> {
    let mut tape: BTreeMap<i64, u8> = tape0
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (i as i64, v)))
        .collect();
    let mut head = head0;
    let mut state = state0;
    for step in 1..=max_steps {
        let sym = tape.get(&head).copied();
        let act = g.action(state, sym)?;
        tape.insert(head, act.write);
        head += act.dir as i64;
        state = act.next;
        if let Some(v) = act.emit {
            return Some(OracleResult {
                value: v,
                steps: step,
                tape,
                head,
                state,
            });
        }
    }
    None
}

/// Outcome of up to `budget` G-steps confined to a window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowResult {
    pub tape: Vec<GSym>,
    pub pos: PayloadPos,
    pub steps: u32,
    /// (window offset, value) for each emit, in order.
    pub emits: Vec<(u32, u16)>,
    /// True when stopped because the head would leave the window or the
    /// transition was undefined.
    pub stuck: bool,
    /// −1/0/+1 by the landing position: left quarter of the window,
    /// right quarter, else 0.
    pub dir_hint: i8,
}

/// Shared kernel: applies at most `budget` G-steps inside `tape` (a window of
/// the payload track), stopping early at the window edges.
pub fn run_window(g: &GMachine, tape: &[GSym], pos: PayloadPos, budget: u32) -> WindowResult {
    let len = tape.len() as i64;
    let mut tape = tape.to_vec();
    let mut off = pos.offset as i64;
    let mut state = pos.state;
    let mut emits = Vec::new();
    let mut steps = 0u32;
    let mut stuck = false;
    while steps < budget {
        if off < 0 || off >= len {
            stuck = true;
            break;
        }
        let sym = tape[off as usize];
        let act = match g.action(state, sym) {
            Some(a) => a,
            None => {
                stuck = true;
                break;
            }
        };
        let next_off = off + act.dir as i64;
        if next_off < 0 || next_off >= len {
            // The move would exit the window: stop before applying.
            stuck = true;
            break;
        }
        tape[off as usize] = Some(act.write);
        if let Some(v) = act.emit {
            emits.push((off as u32, v));
        }
        off = next_off;
        state = act.next;
        steps += 1;
    }
    let dir_hint = if off < len / 4 {
        -1
    } else if off >= 3 * len / 4 {
        1
    } else {
        0
    };
    WindowResult {
        tape,
        pos: PayloadPos {
            offset: off as u32,
            side: if off * 2 >= len { 1 } else { 0 },
            state,
        },
        steps,
        emits,
        stuck,
        dir_hint,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_first_output_after_2n_plus_3() {
        let g = GMachine::incrementer();
        for n in 1..6usize {
            let tape = unary_input_tape(n);
            let r = oracle_first_output(&g, &tape, 1, 0, 1000).unwrap();
            assert_eq!(r.value, 1);
            assert_eq!(r.steps, 2 * n as u64 + 2, "n={n}");
            // Tape now holds the marker plus n+1 ones.
            assert_eq!(r.tape.len(), n + 2);
        }
    }

    #[test]
    fn window_matches_oracle_when_it_fits() {
        let g = GMachine::incrementer();
        let n = 3;
        let mut tape = unary_input_tape(n);
        tape.resize(16, None);
        let res = run_window(
            &g,
            &tape,
            PayloadPos { offset: 1, side: 0, state: 0 },
            1000,
        );
        assert_eq!(res.emits.first(), Some(&(0u32, 1u16)));
        let oracle = oracle_first_output(&g, &tape, 1, 0, 1000).unwrap();
        assert_eq!(oracle.steps as u32, 2 * n as u32 + 2);
    }

    #[test]
    fn window_edge_stop() {
        let g = GMachine::incrementer();
        // Window of 4: marker + 3 ones fills it; appending needs slot 4.
        let tape = unary_input_tape(3);
        assert_eq!(tape.len(), 4);
        let res = run_window(
            &g,
            &tape,
            PayloadPos { offset: 1, side: 0, state: 0 },
            1000,
        );
        assert!(res.stuck);
        assert!(res.steps < 1000);
        assert_eq!(res.pos.offset, 3, "stopped at the edge cell");
        assert_eq!(res.dir_hint, 1, "landed in the right quarter");
    }

    #[test]
    fn window_budget_respected_and_resumable() {
        let g = GMachine::incrementer();
        let mut tape = unary_input_tape(4);
        tape.resize(12, None);
        let p0 = PayloadPos { offset: 1, side: 0, state: 0 };
        let full = run_window(&g, &tape, p0, 7);
        let first = run_window(&g, &tape, p0, 3);
        let rest = run_window(&g, &first.tape, first.pos, 4);
        assert_eq!(full.tape, rest.tape);
        assert_eq!(full.pos, rest.pos);
        assert_eq!(full.steps, first.steps + rest.steps);
    }
}
