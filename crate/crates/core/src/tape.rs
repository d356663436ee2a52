//! Core data model: cell symbols with named fields, sparse tapes with sized
//! bodies, and configurations.
//!
//! The field schema is closed and shared with the rule engine, which
//! addresses fields by name; unknown names are load-time errors. `Vac` is the
//! implicit absence of a cell in the sparse tape; `Bad` is a reserved
//! per-position disorder marker. Neither is ever an input or output of the
//! transition function.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum TapeError {
    #[error("cell body at {0} would overlap an existing body")]
    BodyOverlap(i64),
    #[error("head {head} outside interval [{lo},{hi})")]
    HeadOutside { head: i64, lo: i64, hi: i64 },
    #[error("unknown field name: {0}")]
    UnknownField(String),
    #[error("malformed snapshot: {0}")]
    BadSnapshot(String),
    #[error("symbol does not fit the packing capacity of {0} bytes")]
    PackOverflow(usize),
    #[error("malformed packed symbol: {0}")]
    BadPacked(String),
}

/// Cell kinds (closed set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    New,
    Booting,
    Stem,
    Member0,
    Member1,
    Bridge,
    Outer,
}

impl Kind {
    pub fn code(self) -> i64 {
        match self {
            Kind::New => 0,
            Kind::Booting => 1,
            Kind::Stem => 2,
            Kind::Member0 => 3,
            Kind::Member1 => 4,
            Kind::Bridge => 5,
            Kind::Outer => 6,
        }
    }

    pub fn from_code(c: i64) -> Option<Kind> {
        Some(match c {
            0 => Kind::New,
            1 => Kind::Booting,
            2 => Kind::Stem,
            3 => Kind::Member0,
            4 => Kind::Member1,
            5 => Kind::Bridge,
            6 => Kind::Outer,
            _ => return None,
        })
    }
}

/// Procedure indicator values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Proc {
    Boot,
    Simulate,
    Heal,
    Rebuild,
    RebuildHeal,
}

impl Proc {
    pub fn code(self) -> i64 {
        match self {
            Proc::Boot => 0,
            Proc::Simulate => 1,
            Proc::Heal => 2,
            Proc::Rebuild => 3,
            Proc::RebuildHeal => 4,
        }
    }

    pub fn from_code(c: i64) -> Option<Proc> {
        Some(match c {
            0 => Proc::Boot,
            1 => Proc::Simulate,
            2 => Proc::Heal,
            3 => Proc::Rebuild,
            4 => Proc::RebuildHeal,
            _ => return None,
        })
    }
}

/// BigDigression special values beyond the numeric range −1..F.
pub const BIGDIG_OMEGA: i64 = 1_000_000; // footprint mark ω
pub const BIGDIG_DELTA_NEG: i64 = 1_000_001; // δ_{−1}
pub const BIGDIG_DELTA_POS: i64 = 1_000_002; // δ_{+1}

/// One simulated-G tape cell carried in a payload segment.
pub type GSym = Option<u8>;

/// Payload sub-record: a tape segment of the simulated machine G plus the
/// represented G-head (window offset `a`, side j′, and G control state).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Payload {
    pub tape: Vec<GSym>,
    pub pos: Option<PayloadPos>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PayloadPos {
    pub offset: u32,
    pub side: u8,
    pub state: u8,
}

/// Hold[j] shadow of the voted tracks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hold {
    pub info: Option<u128>,
    pub drift: Option<i8>,
    pub replace: Option<u8>,
}

/// Rebuild track group. A cell is marked for rebuilding when any part of the
/// group is defined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rebuild {
    pub sweep: Option<i64>,
    pub addr: Option<i64>,
    pub half: Option<i8>,
    pub base: Option<u8>,
    pub r1: Option<u8>,
    pub r2: Option<u8>,
}

impl Rebuild {
    pub fn any_defined(&self) -> bool {
        self.sweep.is_some()
            || self.addr.is_some()
            || self.half.is_some()
            || self.base.is_some()
            || self.r1.is_some()
            || self.r2.is_some()
    }
}

/// Scratch record: a micro-op mode, a few registers, and token slots used as
/// the work tape for the program string and interpreter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Work {
    pub mode: Option<i64>,
    pub regs: [FieldValue; 6],
    pub toks: Vec<u16>,
}

/// Value of one field as seen by the rule engine.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldValue {
    /// Undefined (*).
    #[default]
    U,
    I(i64),
    Info(u128),
    Seg(Vec<GSym>),
    Pos(PayloadPos),
    /// Interpreter sub-machine control state (bounded; one rule at most).
    Ctl(Box<crate::interp::InterpCtl>),
}

impl FieldValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            FieldValue::I(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        !matches!(self, FieldValue::U)
    }

    pub fn from_opt_int<T: Into<i64>>(v: Option<T>) -> FieldValue {
        match v {
            Some(x) => FieldValue::I(x.into()),
            None => FieldValue::U,
        }
    }
}

/// A full cell symbol. `new_0`/`new_1` are the two New-kind symbols that
/// differ only in `pass`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellSymbol {
    pub kind: Kind,
    pub info: Option<u128>,
    pub addr: i64,
    pub age: i64,
    pub sweep: i64,
    pub drift: i8,
    pub pass: i8,
    pub replace: Option<u8>,
    pub big_digression: Option<i64>,
    pub front_addr: Option<i64>,
    pub hold: [Hold; 3],
    pub compliant: [Option<bool>; 3],
    pub payload: Payload,
    pub rebuild: Rebuild,
    pub work: Work,
    pub index: Option<i64>,
    pub output: Option<u16>,
    pub proc_ind: Option<Proc>,
}

impl CellSymbol {
    pub fn blank(kind: Kind) -> CellSymbol {
        CellSymbol {
            kind,
            info: None,
            addr: 0,
            age: 0,
            sweep: 0,
            drift: 1,
            pass: 0,
            replace: None,
            big_digression: None,
            front_addr: None,
            hold: [Hold::default(); 3],
            compliant: [None; 3],
            payload: Payload::default(),
            rebuild: Rebuild::default(),
            work: Work::default(),
            index: None,
            output: None,
            proc_ind: None,
        }
    }

    /// new_i: the New-kind symbol with Pass = i.
    pub fn new_state(pass: u8) -> CellSymbol {
        let mut c = CellSymbol::blank(Kind::New);
        c.pass = pass as i8;
        c
    }

    pub fn is_new(&self) -> bool {
        self.kind == Kind::New
    }

    pub fn get(&self, f: FieldId) -> FieldValue {
        use FieldId::*;
        match f {
            KindF => FieldValue::I(self.kind.code()),
            InfoF => match self.info {
                Some(v) => FieldValue::Info(v),
                None => FieldValue::U,
            },
            Addr => FieldValue::I(self.addr),
            Age => FieldValue::I(self.age),
            Sweep => FieldValue::I(self.sweep),
            Drift => FieldValue::I(self.drift as i64),
            Pass => FieldValue::I(self.pass as i64),
            Replace => FieldValue::from_opt_int(self.replace.map(|v| v as i64)),
            BigDigression => FieldValue::from_opt_int(self.big_digression),
            FrontAddr => FieldValue::from_opt_int(self.front_addr),
            HoldInfo(j) => match self.hold[j as usize].info {
                Some(v) => FieldValue::Info(v),
                None => FieldValue::U,
            },
            HoldDrift(j) => FieldValue::from_opt_int(self.hold[j as usize].drift.map(|v| v as i64)),
            HoldReplace(j) => {
                FieldValue::from_opt_int(self.hold[j as usize].replace.map(|v| v as i64))
            }
            Compliant(j) => FieldValue::from_opt_int(self.compliant[j as usize].map(|v| v as i64)),
            PayloadTape => FieldValue::Seg(self.payload.tape.clone()),
            PayloadPosF => match self.payload.pos {
                Some(p) => FieldValue::Pos(p),
                None => FieldValue::U,
            },
            RebuildSweep => FieldValue::from_opt_int(self.rebuild.sweep),
            RebuildAddr => FieldValue::from_opt_int(self.rebuild.addr),
            RebuildHalf => FieldValue::from_opt_int(self.rebuild.half.map(|v| v as i64)),
            RebuildBase => FieldValue::from_opt_int(self.rebuild.base.map(|v| v as i64)),
            RebuildR1 => FieldValue::from_opt_int(self.rebuild.r1.map(|v| v as i64)),
            RebuildR2 => FieldValue::from_opt_int(self.rebuild.r2.map(|v| v as i64)),
            WorkMode => FieldValue::from_opt_int(self.work.mode),
            WorkReg(i) => self.work.regs[i as usize].clone(),
            WorkTok(i) => match self.work.toks.get(i as usize) {
                Some(&v) => FieldValue::I(v as i64),
                None => FieldValue::U,
            },
            Index => FieldValue::from_opt_int(self.index),
            Output => FieldValue::from_opt_int(self.output.map(|v| v as i64)),
            ProcF => FieldValue::from_opt_int(self.proc_ind.map(|p| p.code())),
        }
    }

    pub fn set(&mut self, f: FieldId, v: FieldValue) -> Result<(), TapeError> {
        use FieldId::*;
        let bad = || TapeError::BadSnapshot(format!("value {v:?} invalid for field {f:?}"));
        match f {
            KindF => {
                self.kind = Kind::from_code(v.as_int().ok_or_else(bad)?).ok_or_else(bad)?;
            }
            InfoF => {
                self.info = match v {
                    FieldValue::U => None,
                    FieldValue::Info(x) => Some(x),
                    FieldValue::I(x) => Some(x as u128),
                    _ => return Err(bad()),
                };
            }
            Addr => self.addr = v.as_int().ok_or_else(bad)?,
            Age => self.age = v.as_int().ok_or_else(bad)?,
            Sweep => self.sweep = v.as_int().ok_or_else(bad)?,
            Drift => self.drift = v.as_int().ok_or_else(bad)? as i8,
            Pass => self.pass = v.as_int().ok_or_else(bad)? as i8,
            Replace => self.replace = opt_int(&v).map(|x| x as u8),
            BigDigression => self.big_digression = opt_int(&v),
            FrontAddr => self.front_addr = opt_int(&v),
            HoldInfo(j) => {
                self.hold[j as usize].info = match v {
                    FieldValue::U => None,
                    FieldValue::Info(x) => Some(x),
                    FieldValue::I(x) => Some(x as u128),
                    _ => return Err(bad()),
                };
            }
            HoldDrift(j) => self.hold[j as usize].drift = opt_int(&v).map(|x| x as i8),
            HoldReplace(j) => self.hold[j as usize].replace = opt_int(&v).map(|x| x as u8),
            Compliant(j) => self.compliant[j as usize] = opt_int(&v).map(|x| x != 0),
            PayloadTape => {
                self.payload.tape = match v {
                    FieldValue::Seg(s) => s,
                    FieldValue::U => Vec::new(),
                    _ => return Err(bad()),
                };
            }
            PayloadPosF => {
                self.payload.pos = match v {
                    FieldValue::U => None,
                    FieldValue::Pos(p) => Some(p),
                    _ => return Err(bad()),
                };
            }
            RebuildSweep => self.rebuild.sweep = opt_int(&v),
            RebuildAddr => self.rebuild.addr = opt_int(&v),
            RebuildHalf => self.rebuild.half = opt_int(&v).map(|x| x as i8),
            RebuildBase => self.rebuild.base = opt_int(&v).map(|x| x as u8),
            RebuildR1 => self.rebuild.r1 = opt_int(&v).map(|x| x as u8),
            RebuildR2 => self.rebuild.r2 = opt_int(&v).map(|x| x as u8),
            WorkMode => self.work.mode = opt_int(&v),
            WorkReg(i) => self.work.regs[i as usize] = v,
            WorkTok(i) => {
                let i = i as usize;
                match v {
                    FieldValue::U => {
                        if i < self.work.toks.len() {
                            self.work.toks[i] = 0;
                        }
                    }
                    FieldValue::I(x) => {
                        if self.work.toks.len() <= i {
                            self.work.toks.resize(i + 1, 0);
                        }
                        self.work.toks[i] = x as u16;
                    }
                    _ => return Err(bad()),
                }
            }
            Index => self.index = opt_int(&v),
            Output => self.output = opt_int(&v).map(|x| x as u16),
            ProcF => {
                self.proc_ind = match opt_int(&v) {
                    None => None,
                    Some(c) => Some(Proc::from_code(c).ok_or_else(bad)?),
                };
            }
        }
        Ok(())
    }
}

fn opt_int(v: &FieldValue) -> Option<i64> {
    match v {
        FieldValue::U => None,
        FieldValue::I(x) => Some(*x),
        _ => None,
    }
}

/// Closed field schema. `j` indices are 0-based internally (Hold[1..3] in
/// surface syntax maps to 0..2 here).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FieldId {
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
    HoldInfo(u8),
    HoldDrift(u8),
    HoldReplace(u8),
    Compliant(u8),
    PayloadTape,
    PayloadPosF,
    RebuildSweep,
    RebuildAddr,
    RebuildHalf,
    RebuildBase,
    RebuildR1,
    RebuildR2,
    WorkMode,
    WorkReg(u8),
    WorkTok(u16),
    Index,
    Output,
    ProcF,
}

impl FieldId {
    pub fn name(&self) -> String {
        use FieldId::*;
        match self {
            KindF => "Kind".into(),
            InfoF => "Info".into(),
            Addr => "Addr".into(),
            Age => "Age".into(),
            Sweep => "Sweep".into(),
            Drift => "Drift".into(),
            Pass => "Pass".into(),
            Replace => "Replace".into(),
            BigDigression => "BigDigression".into(),
            FrontAddr => "FrontAddr".into(),
            HoldInfo(j) => format!("Hold{}.Info", j + 1),
            HoldDrift(j) => format!("Hold{}.Drift", j + 1),
            HoldReplace(j) => format!("Hold{}.Replace", j + 1),
            Compliant(j) => format!("Compliant{}", j + 1),
            PayloadTape => "Payload.Tape".into(),
            PayloadPosF => "Payload.Pos".into(),
            RebuildSweep => "Rebuild.Sweep".into(),
            RebuildAddr => "Rebuild.Addr".into(),
            RebuildHalf => "Rebuild.Half".into(),
            RebuildBase => "Rebuild.Base".into(),
            RebuildR1 => "Rebuild.R1".into(),
            RebuildR2 => "Rebuild.R2".into(),
            WorkMode => "Work.Mode".into(),
            WorkReg(i) => format!("Work.R{i}"),
            WorkTok(i) => format!("Work.T{i}"),
            Index => "Index".into(),
            Output => "Output".into(),
            ProcF => "Proc".into(),
        }
    }

    pub fn parse(name: &str) -> Result<FieldId, TapeError> {
        use FieldId::*;
        let fixed = match name {
            "Kind" => Some(KindF),
            "Info" => Some(InfoF),
            "Addr" => Some(Addr),
            "Age" => Some(Age),
            "Sweep" => Some(Sweep),
            "Drift" => Some(Drift),
            "Pass" => Some(Pass),
            "Replace" => Some(Replace),
            "BigDigression" => Some(BigDigression),
            "FrontAddr" => Some(FrontAddr),
            "Payload.Tape" => Some(PayloadTape),
            "Payload.Pos" => Some(PayloadPosF),
            "Rebuild.Sweep" => Some(RebuildSweep),
            "Rebuild.Addr" => Some(RebuildAddr),
            "Rebuild.Half" => Some(RebuildHalf),
            "Rebuild.Base" => Some(RebuildBase),
            "Rebuild.R1" => Some(RebuildR1),
            "Rebuild.R2" => Some(RebuildR2),
            "Work.Mode" => Some(WorkMode),
            "Index" => Some(Index),
            "Output" => Some(Output),
            "Proc" => Some(ProcF),
            _ => None,
        };
        if let Some(f) = fixed {
            return Ok(f);
        }
        let err = || TapeError::UnknownField(name.to_string());
        if let Some(rest) = name.strip_prefix("Hold") {
            let (j, field) = rest.split_once('.').ok_or_else(err)?;
            let j: u8 = j.parse().map_err(|_| err())?;
            if !(1..=3).contains(&j) {
                return Err(err());
            }
            return match field {
                "Info" => Ok(HoldInfo(j - 1)),
                "Drift" => Ok(HoldDrift(j - 1)),
                "Replace" => Ok(HoldReplace(j - 1)),
                _ => Err(err()),
            };
        }
        if let Some(j) = name.strip_prefix("Compliant") {
            let j: u8 = j.parse().map_err(|_| err())?;
            if !(1..=3).contains(&j) {
                return Err(err());
            }
            return Ok(Compliant(j - 1));
        }
        if let Some(i) = name.strip_prefix("Work.R") {
            let i: u8 = i.parse().map_err(|_| err())?;
            if i >= 6 {
                return Err(err());
            }
            return Ok(WorkReg(i));
        }
        if let Some(i) = name.strip_prefix("Work.T") {
            let i: u16 = i.parse().map_err(|_| err())?;
            return Ok(WorkTok(i));
        }
        Err(err())
    }
}

/// A tape entry: a cell starting here, or the disorder marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symbol {
    Bad,
    Cell(CellSymbol),
}

impl Symbol {
    pub fn cell(&self) -> Option<&CellSymbol> {
        match self {
            Symbol::Cell(c) => Some(c),
            Symbol::Bad => None,
        }
    }

    pub fn cell_mut(&mut self) -> Option<&mut CellSymbol> {
        match self {
            Symbol::Cell(c) => Some(c),
            Symbol::Bad => None,
        }
    }
}

/// Sparse tape: body size B and a map from leftmost body position to the
/// symbol there. Positions not covered are Vac.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tape {
    pub b: i64,
    cells: BTreeMap<i64, Symbol>,
}

impl Tape {
    pub fn new(b: i64) -> Tape {
        assert!(b >= 1);
        Tape {
            b,
            cells: BTreeMap::new(),
        }
    }

    pub fn get(&self, p: i64) -> Option<&Symbol> {
        self.cells.get(&p)
    }

    pub fn get_cell(&self, p: i64) -> Option<&CellSymbol> {
        self.cells.get(&p).and_then(|s| s.cell())
    }

    pub fn get_cell_mut(&mut self, p: i64) -> Option<&mut CellSymbol> {
        self.cells.get_mut(&p).and_then(|s| s.cell_mut())
    }

    /// Inserts a symbol at p, checking body disjointness against neighbors.
    pub fn set(&mut self, p: i64, sym: Symbol) -> Result<(), TapeError> {
        if matches!(sym, Symbol::Cell(_)) {
            if let Some((&q, s)) = self.cells.range(..p).next_back() {
                if matches!(s, Symbol::Cell(_)) && q + self.b > p {
                    return Err(TapeError::BodyOverlap(p));
                }
            }
            if let Some((&q, _)) = self.cells.range(p + 1..p + self.b).next() {
                return Err(TapeError::BodyOverlap(q));
            }
        }
        self.cells.insert(p, sym);
        Ok(())
    }

    pub fn remove(&mut self, p: i64) -> Option<Symbol> {
        self.cells.remove(&p)
    }

    pub fn is_vac(&self, p: i64) -> bool {
        !self.cells.contains_key(&p)
    }

    /// A position is clean when it does not carry the disorder marker.
    pub fn is_clean(&self, p: i64) -> bool {
        !matches!(self.cells.get(&p), Some(Symbol::Bad))
    }

    pub fn is_clean_interval(&self, lo: i64, hi: i64) -> bool {
        self.cells
            .range(lo..hi)
            .all(|(_, s)| !matches!(s, Symbol::Bad))
    }

    /// Next cell start at position > p within a clean stretch of < B.
    pub fn right_neighbor(&self, p: i64) -> Option<i64> {
        let (&q, s) = self.cells.range(p + 1..).next()?;
        if !matches!(s, Symbol::Cell(_)) {
            return None;
        }
        // neighbor: bodies at distance < B within a clean interval
        if q - (p + self.b) < self.b && self.is_clean_interval(p, q + self.b) {
            Some(q)
        } else {
            None
        }
    }

    pub fn left_neighbor(&self, p: i64) -> Option<i64> {
        let (&q, s) = self.cells.range(..p).next_back()?;
        if !matches!(s, Symbol::Cell(_)) {
            return None;
        }
        if p - (q + self.b) < self.b && self.is_clean_interval(q, p + self.b) {
            Some(q)
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Symbol)> {
        self.cells.iter().map(|(&p, s)| (p, s))
    }

    pub fn range(&self, lo: i64, hi: i64) -> impl Iterator<Item = (i64, &Symbol)> {
        self.cells.range(lo..hi).map(|(&p, s)| (p, s))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn span(&self) -> Option<(i64, i64)> {
        let lo = *self.cells.keys().next()?;
        let hi = *self.cells.keys().next_back()?;
        Some((lo, hi + self.b))
    }
}

/// A full configuration: tape, head position, current cell-pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub tape: Tape,
    pub pos: i64,
    pub cur: (i64, i64),
}

impl Configuration {
    pub fn new(tape: Tape, pos: i64, cur: (i64, i64)) -> Configuration {
        Configuration { tape, pos, cur }
    }

    /// Restriction to an interval [lo, hi) containing the head.
    pub fn interval_view(&self, lo: i64, hi: i64) -> Result<Configuration, TapeError> {
        if self.pos < lo || self.pos >= hi {
            return Err(TapeError::HeadOutside {
                head: self.pos,
                lo,
                hi,
            });
        }
        let mut t = Tape::new(self.tape.b);
        for (p, s) in self.tape.range(lo, hi) {
            t.set(p, s.clone())?;
        }
        Ok(Configuration {
            tape: t,
            pos: self.pos,
            cur: self.cur,
        })
    }

    /// Merges another view into this one; overlapping cells must agree.
    pub fn absorb(&mut self, other: &Configuration) -> Result<(), TapeError> {
        for (p, s) in other.tape.iter() {
            match self.tape.get(p) {
                None => {
                    self.tape.set(p, s.clone())?;
                }
                Some(existing) if existing == s => {}
                Some(_) => {
                    return Err(TapeError::BadSnapshot(format!(
                        "conflicting symbols at {p} during reassembly"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Snapshot text: header line, then one sorted record per position.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "ftm-snapshot v{} b={} pos={} cur0={} cur1={}",
            SNAPSHOT_SCHEMA_VERSION, self.tape.b, self.pos, self.cur.0, self.cur.1
        );
        for (p, s) in self.tape.iter() {
            match s {
                Symbol::Bad => {
                    let _ = writeln!(out, "{p} BAD");
                }
                Symbol::Cell(c) => {
                    let _ = writeln!(out, "{p} {}", serde_json::to_string(c).unwrap());
                }
            }
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Configuration, TapeError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(TapeError::BadSnapshot("empty".into()))?;
        let mut b = None;
        let mut pos = None;
        let mut cur0 = None;
        let mut cur1 = None;
        for part in header.split_whitespace() {
            if let Some((k, v)) = part.split_once('=') {
                let v: i64 = v
                    .parse()
                    .map_err(|_| TapeError::BadSnapshot(format!("bad header field {part}")))?;
                match k {
                    "b" => b = Some(v),
                    "pos" => pos = Some(v),
                    "cur0" => cur0 = Some(v),
                    "cur1" => cur1 = Some(v),
                    _ => {}
                }
            }
        }
        let (b, pos, cur0, cur1) = match (b, pos, cur0, cur1) {
            (Some(b), Some(p), Some(c0), Some(c1)) => (b, p, c0, c1),
            _ => return Err(TapeError::BadSnapshot("incomplete header".into())),
        };
        let mut tape = Tape::new(b);
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (p, rest) = line
                .split_once(' ')
                .ok_or(TapeError::BadSnapshot(format!("bad record: {line}")))?;
            let p: i64 = p
                .parse()
                .map_err(|_| TapeError::BadSnapshot(format!("bad position: {line}")))?;
            if rest == "BAD" {
                tape.set(p, Symbol::Bad)?;
            } else {
                let c: CellSymbol = serde_json::from_str(rest)
                    .map_err(|e| TapeError::BadSnapshot(format!("bad cell at {p}: {e}")))?;
                tape.set(p, Symbol::Cell(c))?;
            }
        }
        Ok(Configuration {
            tape,
            pos,
            cur: (cur0, cur1),
        })
    }
}

// ---------------------------------------------------------------------------
// Packed symbol encoding: the byte string a colony's Info track carries for
// one simulated cell. Bitmap of defined groups + fixed-width little-endian
// values. Must round-trip exactly; overflow is an error, never truncation.
// ---------------------------------------------------------------------------

struct BitWriter {
    bytes: Vec<u8>,
    cur: u8,
    nbits: u8,
}

impl BitWriter {
    fn new() -> Self {
        BitWriter {
            bytes: Vec::new(),
            cur: 0,
            nbits: 0,
        }
    }

    fn push_bits(&mut self, v: u64, n: u8) {
        for i in 0..n {
            let bit = (v >> i) & 1;
            self.cur |= (bit as u8) << self.nbits;
            self.nbits += 1;
            if self.nbits == 8 {
                self.bytes.push(self.cur);
                self.cur = 0;
                self.nbits = 0;
            }
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            self.bytes.push(self.cur);
        }
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    bit: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, bit: 0 }
    }

    fn read_bits(&mut self, n: u8) -> Result<u64, TapeError> {
        let mut v = 0u64;
        for i in 0..n {
            let byte = self.bit / 8;
            if byte >= self.bytes.len() {
                return Err(TapeError::BadPacked("truncated".into()));
            }
            let bit = (self.bytes[byte] >> (self.bit % 8)) & 1;
            v |= (bit as u64) << i;
            self.bit += 1;
        }
        Ok(v)
    }
}

/// Packs a symbol into bytes for colony encoding. Scratch groups (Hold,
/// Compliant, Work, Index) pack as presence bits plus values only when
/// defined, so quiescent symbols stay small.
pub fn pack_symbol(c: &CellSymbol) -> Vec<u8> {
    let mut w = BitWriter::new();
    w.push_bits(c.kind.code() as u64, 3);
    w.push_bits(c.addr as u64 & 0xffff, 16);
    w.push_bits(c.age as u64 & 0xffffffff, 32);
    w.push_bits(c.sweep as u64 & 0xffff, 16);
    w.push_bits(if c.drift > 0 { 1 } else { 0 }, 1);
    w.push_bits((c.pass + 1) as u64, 2);
    match c.replace {
        None => w.push_bits(0, 1),
        Some(r) => {
            w.push_bits(1, 1);
            w.push_bits(r as u64, 1);
        }
    }
    match c.big_digression {
        None => w.push_bits(0, 1),
        Some(v) => {
            w.push_bits(1, 1);
            let enc: u64 = match v {
                BIGDIG_OMEGA => 0x3fffe,
                BIGDIG_DELTA_NEG => 0x3fffd,
                BIGDIG_DELTA_POS => 0x3fffc,
                x => (x + 1) as u64,
            };
            w.push_bits(enc, 18);
        }
    }
    match c.front_addr {
        None => w.push_bits(0, 1),
        Some(v) => {
            w.push_bits(1, 1);
            w.push_bits((v + 0x8000) as u64, 17);
        }
    }
    match c.proc_ind {
        None => w.push_bits(0, 1),
        Some(p) => {
            w.push_bits(1, 1);
            w.push_bits(p.code() as u64, 3);
        }
    }
    match c.output {
        None => w.push_bits(0, 1),
        Some(v) => {
            w.push_bits(1, 1);
            w.push_bits(v as u64, 16);
        }
    }
    match c.info {
        None => w.push_bits(0, 1),
        Some(v) => {
            w.push_bits(1, 1);
            w.push_bits(v as u64, 64);
            w.push_bits((v >> 64) as u64, 64);
        }
    }
    // Payload tape: length then 2 bits per cell (blank/0/1).
    w.push_bits(c.payload.tape.len() as u64, 16);
    for g in &c.payload.tape {
        match g {
            None => w.push_bits(0, 2),
            Some(b) => w.push_bits(1 + (*b as u64).min(2), 2),
        }
    }
    match c.payload.pos {
        None => w.push_bits(0, 1),
        Some(p) => {
            w.push_bits(1, 1);
            w.push_bits(p.offset as u64, 24);
            w.push_bits(p.side as u64, 1);
            w.push_bits(p.state as u64, 8);
        }
    }
    // Scratch groups rarely defined in encoded symbols.
    for h in &c.hold {
        let defined = h.info.is_some() || h.drift.is_some() || h.replace.is_some();
        w.push_bits(defined as u64, 1);
        if defined {
            match h.info {
                None => w.push_bits(0, 1),
                Some(v) => {
                    w.push_bits(1, 1);
                    w.push_bits(v as u64, 64);
                    w.push_bits((v >> 64) as u64, 64);
                }
            }
            match h.drift {
                None => w.push_bits(0, 1),
                Some(d) => {
                    w.push_bits(1, 1);
                    w.push_bits(if d > 0 { 1 } else { 0 }, 1);
                }
            }
            match h.replace {
                None => w.push_bits(0, 1),
                Some(r) => {
                    w.push_bits(1, 1);
                    w.push_bits(r as u64, 1);
                }
            }
        }
    }
    for cj in &c.compliant {
        match cj {
            None => w.push_bits(0, 1),
            Some(b) => {
                w.push_bits(1, 1);
                w.push_bits(*b as u64, 1);
            }
        }
    }
    match c.index {
        None => w.push_bits(0, 1),
        Some(v) => {
            w.push_bits(1, 1);
            w.push_bits(v as u64 & 0xffffff, 24);
        }
    }
    // Rebuild group.
    w.push_bits(c.rebuild.any_defined() as u64, 1);
    if c.rebuild.any_defined() {
        for v in [c.rebuild.sweep, c.rebuild.addr] {
            match v {
                None => w.push_bits(0, 1),
                Some(x) => {
                    w.push_bits(1, 1);
                    w.push_bits((x + 0x80000) as u64, 21);
                }
            }
        }
        match c.rebuild.half {
            None => w.push_bits(0, 1),
            Some(h) => {
                w.push_bits(1, 1);
                w.push_bits(if h > 0 { 1 } else { 0 }, 1);
            }
        }
        for v in [c.rebuild.base, c.rebuild.r1, c.rebuild.r2] {
            match v {
                None => w.push_bits(0, 1),
                Some(x) => {
                    w.push_bits(1, 1);
                    w.push_bits(x as u64, 1);
                }
            }
        }
    }
    // Work is never part of an encoded symbol (cleared at period boundaries),
    // but pack defined modes for completeness.
    match c.work.mode {
        None => w.push_bits(0, 1),
        Some(m) => {
            w.push_bits(1, 1);
            w.push_bits((m + 0x8000) as u64, 17);
        }
    }
    w.finish()
}

pub fn unpack_symbol(bytes: &[u8]) -> Result<CellSymbol, TapeError> {
    let mut r = BitReader::new(bytes);
    let mut c = CellSymbol::blank(Kind::Stem);
    c.kind = Kind::from_code(r.read_bits(3)? as i64)
        .ok_or(TapeError::BadPacked("kind".into()))?;
    c.addr = r.read_bits(16)? as i64;
    c.age = r.read_bits(32)? as i64;
    c.sweep = r.read_bits(16)? as i64;
    c.drift = if r.read_bits(1)? == 1 { 1 } else { -1 };
    c.pass = r.read_bits(2)? as i8 - 1;
    if r.read_bits(1)? == 1 {
        c.replace = Some(r.read_bits(1)? as u8);
    }
    if r.read_bits(1)? == 1 {
        let enc = r.read_bits(18)?;
        c.big_digression = Some(match enc {
            0x3fffe => BIGDIG_OMEGA,
            0x3fffd => BIGDIG_DELTA_NEG,
            0x3fffc => BIGDIG_DELTA_POS,
            x => x as i64 - 1,
        });
    }
    if r.read_bits(1)? == 1 {
        c.front_addr = Some(r.read_bits(17)? as i64 - 0x8000);
    }
    if r.read_bits(1)? == 1 {
        c.proc_ind = Proc::from_code(r.read_bits(3)? as i64);
    }
    if r.read_bits(1)? == 1 {
        c.output = Some(r.read_bits(16)? as u16);
    }
    if r.read_bits(1)? == 1 {
        let lo = r.read_bits(64)? as u128;
        let hi = r.read_bits(64)? as u128;
        c.info = Some(lo | (hi << 64));
    }
    let plen = r.read_bits(16)? as usize;
    if plen > 1 << 14 {
        return Err(TapeError::BadPacked("payload length".into()));
    }
    c.payload.tape = (0..plen)
        .map(|_| {
            r.read_bits(2).map(|v| match v {
                0 => None,
                x => Some((x - 1) as u8),
            })
        })
        .collect::<Result<_, _>>()?;
    if r.read_bits(1)? == 1 {
        c.payload.pos = Some(PayloadPos {
            offset: r.read_bits(24)? as u32,
            side: r.read_bits(1)? as u8,
            state: r.read_bits(8)? as u8,
        });
    }
    for j in 0..3 {
        if r.read_bits(1)? == 1 {
            if r.read_bits(1)? == 1 {
                let lo = r.read_bits(64)? as u128;
                let hi = r.read_bits(64)? as u128;
                c.hold[j].info = Some(lo | (hi << 64));
            }
            if r.read_bits(1)? == 1 {
                c.hold[j].drift = Some(if r.read_bits(1)? == 1 { 1 } else { -1 });
            }
            if r.read_bits(1)? == 1 {
                c.hold[j].replace = Some(r.read_bits(1)? as u8);
            }
        }
    }
    for j in 0..3 {
        if r.read_bits(1)? == 1 {
            c.compliant[j] = Some(r.read_bits(1)? == 1);
        }
    }
    if r.read_bits(1)? == 1 {
        c.index = Some(r.read_bits(24)? as i64);
    }
    if r.read_bits(1)? == 1 {
        for slot in 0..2 {
            if r.read_bits(1)? == 1 {
                let v = r.read_bits(21)? as i64 - 0x80000;
                if slot == 0 {
                    c.rebuild.sweep = Some(v);
                } else {
                    c.rebuild.addr = Some(v);
                }
            }
        }
        if r.read_bits(1)? == 1 {
            c.rebuild.half = Some(if r.read_bits(1)? == 1 { 1 } else { -1 });
        }
        for slot in 0..3 {
            if r.read_bits(1)? == 1 {
                let v = r.read_bits(1)? as u8;
                match slot {
                    0 => c.rebuild.base = Some(v),
                    1 => c.rebuild.r1 = Some(v),
                    _ => c.rebuild.r2 = Some(v),
                }
            }
        }
    }
    if r.read_bits(1)? == 1 {
        c.work.mode = Some(r.read_bits(17)? as i64 - 0x8000);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_names_round_trip() {
        let ids = [
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
            FieldId::HoldInfo(0),
            FieldId::HoldDrift(2),
            FieldId::HoldReplace(1),
            FieldId::Compliant(0),
            FieldId::PayloadTape,
            FieldId::PayloadPosF,
            FieldId::RebuildSweep,
            FieldId::RebuildAddr,
            FieldId::RebuildHalf,
            FieldId::RebuildBase,
            FieldId::RebuildR1,
            FieldId::RebuildR2,
            FieldId::WorkMode,
            FieldId::WorkReg(3),
            FieldId::WorkTok(17),
            FieldId::Index,
            FieldId::Output,
            FieldId::ProcF,
        ];
        for id in ids {
            assert_eq!(FieldId::parse(&id.name()).unwrap(), id, "{}", id.name());
        }
    }

    #[test]
    fn unknown_field_is_error() {
        assert!(matches!(
            FieldId::parse("Bogus"),
            Err(TapeError::UnknownField(_))
        ));
        assert!(FieldId::parse("Hold4.Info").is_err());
        assert!(FieldId::parse("Work.R9").is_err());
    }

    #[test]
    fn get_set_round_trip_all_fields() {
        let mut c = CellSymbol::blank(Kind::Member0);
        c.info = Some(0xdeadbeef_12345678_90abcdef_fedcba98);
        c.addr = 7;
        c.age = 123;
        c.pass = -1;
        c.big_digression = Some(BIGDIG_OMEGA);
        c.payload.tape = vec![None, Some(1), Some(0)];
        c.payload.pos = Some(PayloadPos {
            offset: 5,
            side: 1,
            state: 2,
        });
        let ids = [
            FieldId::KindF,
            FieldId::InfoF,
            FieldId::Addr,
            FieldId::Age,
            FieldId::Pass,
            FieldId::BigDigression,
            FieldId::PayloadTape,
            FieldId::PayloadPosF,
        ];
        let mut d = CellSymbol::blank(Kind::Stem);
        for id in ids {
            d.set(id, c.get(id)).unwrap();
        }
        assert_eq!(d.get(FieldId::InfoF), c.get(FieldId::InfoF));
        assert_eq!(d.get(FieldId::BigDigression), c.get(FieldId::BigDigression));
        assert_eq!(d.payload, c.payload);
    }

    #[test]
    fn body_disjointness() {
        let mut t = Tape::new(4);
        t.set(0, Symbol::Cell(CellSymbol::blank(Kind::Stem))).unwrap();
        assert!(t.set(3, Symbol::Cell(CellSymbol::blank(Kind::Stem))).is_err());
        assert!(t.set(4, Symbol::Cell(CellSymbol::blank(Kind::Stem))).is_ok());
        assert!(t.set(2, Symbol::Cell(CellSymbol::blank(Kind::Stem))).is_err());
    }

    #[test]
    fn neighbors_and_adjacency() {
        let mut t = Tape::new(2);
        t.set(0, Symbol::Cell(CellSymbol::blank(Kind::Stem))).unwrap();
        t.set(3, Symbol::Cell(CellSymbol::blank(Kind::Stem))).unwrap();
        // distance 1 < B: neighbors, not adjacent
        assert_eq!(t.right_neighbor(0), Some(3));
        assert_eq!(t.left_neighbor(3), Some(0));
        t.set(7, Symbol::Cell(CellSymbol::blank(Kind::Stem))).unwrap();
        // distance 2 >= B: not neighbors
        assert_eq!(t.right_neighbor(3), None);
    }

    #[test]
    fn interval_view_round_trip() {
        let mut t = Tape::new(1);
        for p in -3..5 {
            let mut c = CellSymbol::blank(Kind::Stem);
            c.addr = p + 10;
            t.set(p, Symbol::Cell(c)).unwrap();
        }
        let cfg = Configuration::new(t, 0, (0, 1));
        let whole = cfg.interval_view(-3, 5).unwrap();
        assert_eq!(whole.tape, cfg.tape);
        let left = cfg.interval_view(-3, 1).unwrap();
        let mut right = cfg.interval_view(0, 5).unwrap();
        right.absorb(&left).unwrap();
        assert_eq!(right.tape, cfg.tape);
        assert!(cfg.interval_view(1, 5).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut t = Tape::new(1);
        let mut c = CellSymbol::blank(Kind::Member1);
        c.info = Some(42);
        c.payload.tape = vec![Some(1), None];
        t.set(-2, Symbol::Cell(c)).unwrap();
        t.set(5, Symbol::Bad).unwrap();
        let cfg = Configuration::new(t, -2, (-2, -1));
        let text = cfg.to_snapshot();
        let back = Configuration::from_snapshot(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn pack_round_trip_quiescent_and_busy() {
        let mut c = CellSymbol::blank(Kind::Booting);
        c.addr = 15;
        c.age = 3;
        c.payload.tape = vec![Some(1); 8];
        c.payload.pos = Some(PayloadPos {
            offset: 3,
            side: 0,
            state: 1,
        });
        let bytes = pack_symbol(&c);
        assert_eq!(unpack_symbol(&bytes).unwrap(), c);

        let mut busy = CellSymbol::blank(Kind::Member0);
        busy.info = Some(u128::MAX - 12345);
        busy.hold[1].info = Some(99);
        busy.hold[1].drift = Some(-1);
        busy.compliant = [Some(true), None, Some(false)];
        busy.rebuild.addr = Some(-17);
        busy.rebuild.half = Some(1);
        busy.big_digression = Some(6);
        busy.front_addr = Some(-3);
        busy.index = Some(512);
        busy.output = Some(7);
        let bytes = pack_symbol(&busy);
        assert_eq!(unpack_symbol(&bytes).unwrap(), busy);
    }

    #[test]
    fn packed_quiescent_symbol_is_small() {
        let mut c = CellSymbol::blank(Kind::Booting);
        c.payload.tape = vec![None; 4];
        let bytes = pack_symbol(&c);
        assert!(bytes.len() <= 16, "packed {} bytes", bytes.len());
    }
}
