//! Work.Mode encoding: a small family id plus direction and resume payload.
//!
//! Persistent control that must survive between steps lives in packable
//! fields only (Work.Mode, Index, FrontAddr, Pass, BigDigression, Age,
//! Sweep), so the same program remains executable as a simulated machine.

/// mode = family·1024 + resume·16 + dir_bit·2 + aux. dir_bit 1 = rightward.
pub const FAM_SHIFT: i64 = 1024;
pub const RESUME_SHIFT: i64 = 16;
pub const DIR_BIT: i64 = 2;

pub const FAM_SEEK: i64 = 1;
pub const FAM_ZIG_OUT: i64 = 2;
pub const FAM_ZIG_BACK: i64 = 3;
pub const FAM_ZIG_RET: i64 = 4;
pub const FAM_WRITER: i64 = 5;
pub const FAM_INTERP: i64 = 6;
pub const FAM_SWEEP_START: i64 = 7;
pub const FAM_GRUN: i64 = 8;
pub const FAM_MF: i64 = 9;
pub const FAM_TRIP: i64 = 10;
pub const FAM_HEAL: i64 = 11;
pub const FAM_REBUILD: i64 = 12;
pub const FAM_BOOT: i64 = 13;

/// Resume targets for SEEK (what to do after the turn completes).
pub const RES_SWEEP_START: i64 = 0;
pub const RES_ZIG_BACK: i64 = 1;
pub const RES_ZIG_RET: i64 = 2;
pub const RES_MF: i64 = 3;
pub const RES_GRUN: i64 = 4;
pub const RES_CLEAR: i64 = 5;
pub const RES_HEAL: i64 = 6;
pub const RES_REBUILD: i64 = 7;

pub fn mode(family: i64, resume: i64, dir: i64, aux: i64) -> i64 {
    family * FAM_SHIFT + resume * RESUME_SHIFT + (if dir > 0 { DIR_BIT } else { 0 }) + aux
}

pub fn family_of(m: i64) -> i64 {
    m / FAM_SHIFT
}

pub fn resume_of(m: i64) -> i64 {
    (m % FAM_SHIFT) / RESUME_SHIFT
}

pub fn dir_of(m: i64) -> i64 {
    if (m % RESUME_SHIFT) & DIR_BIT != 0 {
        1
    } else {
        -1
    }
}

pub fn aux_of(m: i64) -> i64 {
    (m % RESUME_SHIFT) & 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_round_trip() {
        for fam in [FAM_SEEK, FAM_HEAL, FAM_BOOT] {
            for res in [RES_SWEEP_START, RES_REBUILD] {
                for dir in [-1i64, 1] {
                    for aux in [0i64, 1] {
                        let m = mode(fam, res, dir, aux);
                        assert_eq!(family_of(m), fam);
                        assert_eq!(resume_of(m), res);
                        assert_eq!(dir_of(m), dir);
                        assert_eq!(aux_of(m), aux);
                    }
                }
            }
        }
    }
}
