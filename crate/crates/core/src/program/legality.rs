//! Pair-local legality: the boundary catalog shared by the program's alarm
//! rule and the health checker. A healthy configuration shows only these
//! patterns between adjacent cells; anything else raises alarm.

use crate::params::ParamSet;
use crate::tape::{CellSymbol, FieldId, FieldValue, Kind, BIGDIG_DELTA_NEG, BIGDIG_DELTA_POS, BIGDIG_OMEGA};

fn addr_follows(p: &ParamSet, a: i64, b: i64) -> bool {
    let q = p.q as i64;
    (a + 1).rem_euclid(q) == b.rem_euclid(q)
}

fn big_dig_compatible(x: &CellSymbol, y: &CellSymbol) -> bool {
    match (x.big_digression, y.big_digression) {
        (None, None) => true,
        // D-zone or footprint edges.
        (None, Some(_)) | (Some(_), None) => true,
        (Some(a), Some(b)) => {
            a == b
                || (a - b).abs() == 1
                || a == BIGDIG_OMEGA
                || b == BIGDIG_OMEGA
                || a == BIGDIG_DELTA_NEG
                || b == BIGDIG_DELTA_NEG
                || a == BIGDIG_DELTA_POS
                || b == BIGDIG_DELTA_POS
        }
    }
}

fn is_colony_kind(k: Kind) -> bool {
    matches!(k, Kind::Member0 | Kind::Member1 | Kind::Outer | Kind::Bridge)
}

/// Legality of an adjacent cell pair (x immediately left of y). `alpha` false
/// means a gap separates the bodies; gaps are legal only next to colony ends
/// or stem filler.
pub fn pair_legal(p: &ParamSet, x: &CellSymbol, y: &CellSymbol, alpha: bool) -> bool {
    let q = p.q as i64;
    // Newly created cells are transients of the current step.
    if x.kind == Kind::New || y.kind == Kind::New {
        return true;
    }
    if !big_dig_compatible(x, y) {
        return false;
    }
    if !alpha {
        // A gap: legal at colony ends and around stem filler.
        return x.kind == Kind::Stem
            || y.kind == Kind::Stem
            || x.addr == q - 1
            || y.addr == 0;
    }
    match (x.kind, y.kind) {
        (Kind::Booting, Kind::Booting) => addr_follows(p, x.addr, y.addr),
        (Kind::Booting, Kind::Stem) | (Kind::Stem, Kind::Booting) => true,
        (Kind::Stem, Kind::Stem) => true,
        (Kind::Stem, k) if is_colony_kind(k) => y.addr == 0,
        (k, Kind::Stem) if is_colony_kind(k) => x.addr == q - 1,
        (a, b) if is_colony_kind(a) && is_colony_kind(b) => {
            if a == b {
                // Domain continuation or a colony boundary of equal kinds.
                addr_follows(p, x.addr, y.addr) || (x.addr == q - 1 && y.addr == 0)
            } else {
                // Kind changes are legal at colony boundaries and at the
                // front (where promotion/demotion sweeps are mid-flight).
                (x.addr == q - 1 && y.addr == 0) || addr_follows(p, x.addr, y.addr)
            }
        }
        _ => false,
    }
}

/// Core-field extrapolation used by stitching: the value `to`'s field takes
/// when the domain anchored at `from` is extended over it. `rightward` means
/// the domain grows to the right (from is the left cell).
pub fn extend_core(
    p: &ParamSet,
    from: &CellSymbol,
    to: &CellSymbol,
    rightward: bool,
    fid: FieldId,
) -> FieldValue {
    let q = p.q as i64;
    let _ = to;
    match fid {
        FieldId::Addr => {
            let a = if rightward {
                (from.addr + 1).rem_euclid(q)
            } else {
                (from.addr - 1).rem_euclid(q)
            };
            FieldValue::I(a)
        }
        FieldId::KindF => FieldValue::I(from.kind.code()),
        FieldId::Age => FieldValue::I(from.age),
        FieldId::Sweep => FieldValue::I(from.sweep),
        FieldId::Drift => FieldValue::I(from.drift as i64),
        FieldId::Replace => FieldValue::from_opt_int(from.replace.map(|v| v as i64)),
        FieldId::ProcF => FieldValue::from_opt_int(from.proc_ind.map(|v| v.code())),
        FieldId::BigDigression | FieldId::FrontAddr => FieldValue::U,
        FieldId::RebuildSweep => FieldValue::from_opt_int(from.rebuild.sweep),
        FieldId::RebuildAddr => {
            let delta = if rightward { 1 } else { -1 };
            FieldValue::from_opt_int(from.rebuild.addr.map(|a| a + delta))
        }
        FieldId::RebuildHalf => FieldValue::from_opt_int(from.rebuild.half.map(|v| v as i64)),
        FieldId::RebuildBase => FieldValue::U,
        _ => FieldValue::U,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(kind: Kind, addr: i64) -> CellSymbol {
        let mut c = CellSymbol::blank(kind);
        c.addr = addr;
        c
    }

    #[test]
    fn colony_continuation_legal() {
        let p = ParamSet::toy();
        assert!(pair_legal(&p, &cell(Kind::Member0, 3), &cell(Kind::Member0, 4), true));
        assert!(pair_legal(&p, &cell(Kind::Member0, 15), &cell(Kind::Member1, 0), true));
        assert!(!pair_legal(&p, &cell(Kind::Member0, 3), &cell(Kind::Member0, 7), true));
    }

    #[test]
    fn booting_addresses_mod_q() {
        let p = ParamSet::toy();
        assert!(pair_legal(&p, &cell(Kind::Booting, 15), &cell(Kind::Booting, 0), true));
        assert!(!pair_legal(&p, &cell(Kind::Booting, 3), &cell(Kind::Booting, 5), true));
    }

    #[test]
    fn extend_core_addr_wraps() {
        let p = ParamSet::toy();
        let from = cell(Kind::Outer, 15);
        let to = cell(Kind::Stem, 0);
        assert_eq!(
            extend_core(&p, &from, &to, true, FieldId::Addr),
            FieldValue::I(0)
        );
        assert_eq!(
            extend_core(&p, &from, &to, false, FieldId::Addr),
            FieldValue::I(14)
        );
    }
}
