//! Block codes: repetition, Reed-Solomon over GF(2^16) with optional
//! interleaving, the padded colony code ψ, compliance checking, and the
//! configuration code φ mapping a simulated configuration onto colonies.

use crate::params::ParamSet;
use crate::tape::{
    pack_symbol, unpack_symbol, CellSymbol, Configuration, Kind, Proc, Symbol, Tape, TapeError,
};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodeError {
    #[error("word length {got} does not match block size {want}")]
    WrongLength { want: usize, got: usize },
    #[error("message length {got} does not match {want}")]
    WrongMessageLength { want: usize, got: usize },
    #[error("block size {0} not divisible by repetition count {1}")]
    NotDivisible(usize, usize),
    #[error("declared burst class ({beta},{t}) too large for this code: {detail}")]
    ClassTooLarge { beta: usize, t: usize, detail: String },
    #[error("decode failure: {0}")]
    DecodeFailure(String),
    #[error("symbol does not fit colony capacity of {0} bytes")]
    CapacityExceeded(usize),
    #[error("source current cell-pair not in canonical position")]
    NonCanonicalCur,
    #[error(transparent)]
    Tape(#[from] TapeError),
}

/// A block code over symbol alphabet `S` with block size Q.
pub trait BlockCode<S: Clone + Eq> {
    fn block_len(&self) -> usize;
    fn msg_len(&self) -> usize;
    fn encode(&self, msg: &[S]) -> Result<Vec<S>, CodeError>;
    fn decode(&self, word: &[S]) -> Result<Vec<S>, CodeError>;
    /// Declared burst-correction class (β, t), if any.
    fn declared_class(&self) -> Option<(usize, usize)>;
}

// ---------------------------------------------------------------------------
// Repetition codes
// ---------------------------------------------------------------------------

/// c-fold repetition: encode(x) = x…x, decode by positionwise majority.
/// (β,1)-burst-correcting for c=3, (β,2) for c=5, any β ≤ Q/c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionCode {
    pub copies: usize,
    pub msg_len: usize,
}

impl RepetitionCode {
    pub fn new(copies: usize, block_len: usize) -> Result<RepetitionCode, CodeError> {
        if copies != 3 && copies != 5 {
            return Err(CodeError::NotDivisible(block_len, copies));
        }
        if block_len % copies != 0 {
            return Err(CodeError::NotDivisible(block_len, copies));
        }
        Ok(RepetitionCode {
            copies,
            msg_len: block_len / copies,
        })
    }
}

impl<S: Clone + Eq> BlockCode<S> for RepetitionCode {
    fn block_len(&self) -> usize {
        self.copies * self.msg_len
    }

    fn msg_len(&self) -> usize {
        self.msg_len
    }

    fn encode(&self, msg: &[S]) -> Result<Vec<S>, CodeError> {
        if msg.len() != self.msg_len {
            return Err(CodeError::WrongMessageLength {
                want: self.msg_len,
                got: msg.len(),
            });
        }
        let mut out = Vec::with_capacity(self.copies * self.msg_len);
        for _ in 0..self.copies {
            out.extend_from_slice(msg);
        }
        Ok(out)
    }

    fn decode(&self, word: &[S]) -> Result<Vec<S>, CodeError> {
        if word.len() != self.copies * self.msg_len {
            return Err(CodeError::WrongLength {
                want: self.copies * self.msg_len,
                got: word.len(),
            });
        }
        let mut out = Vec::with_capacity(self.msg_len);
        for i in 0..self.msg_len {
            // x(i) = maj(y(i), y(i+Q/c), …): value at offset i of each copy.
            let mut best: Option<(&S, usize)> = None;
            for c in 0..self.copies {
                let v = &word[i + c * self.msg_len];
                let count = (0..self.copies)
                    .filter(|&c2| &word[i + c2 * self.msg_len] == v)
                    .count();
                match best {
                    Some((_, n)) if n >= count => {}
                    _ => best = Some((v, count)),
                }
            }
            let (v, n) = best.unwrap();
            if n * 2 <= self.copies {
                return Err(CodeError::DecodeFailure(format!(
                    "no majority at payload position {i}"
                )));
            }
            out.push(v.clone());
        }
        Ok(out)
    }

    fn declared_class(&self) -> Option<(usize, usize)> {
        Some((self.msg_len, (self.copies - 1) / 2))
    }
}

// ---------------------------------------------------------------------------
// GF(2^16) and Reed-Solomon
// ---------------------------------------------------------------------------

const GF_POLY: u32 = 0x1100B; // x^16 + x^12 + x^3 + x + 1
const GF_ORDER: usize = 1 << 16;

struct GfTables {
    log: Vec<u16>,
    alog: Vec<u16>,
}

fn gf_tables() -> &'static GfTables {
    static TABLES: OnceLock<GfTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut log = vec![0u16; GF_ORDER];
        let mut alog = vec![0u16; 2 * GF_ORDER];
        let mut x: u32 = 1;
        for i in 0..(GF_ORDER - 1) {
            alog[i] = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << 16) != 0 {
                x ^= GF_POLY;
            }
        }
        for i in (GF_ORDER - 1)..(2 * GF_ORDER) {
            alog[i] = alog[i - (GF_ORDER - 1)];
        }
        GfTables { log, alog }
    })
}

pub fn gf_mul(a: u16, b: u16) -> u16 {
    if a == 0 || b == 0 {
        return 0;
    }
    let t = gf_tables();
    t.alog[t.log[a as usize] as usize + t.log[b as usize] as usize]
}

pub fn gf_inv(a: u16) -> u16 {
    debug_assert!(a != 0);
    let t = gf_tables();
    t.alog[(GF_ORDER - 1) - t.log[a as usize] as usize]
}

fn gf_pow_alpha(e: usize) -> u16 {
    gf_tables().alog[e % (GF_ORDER - 1)]
}

/// Systematic Reed-Solomon over GF(2^16): n total symbols, k message symbols.
/// Corrects up to (n−k)/2 symbol errors; declared burst class (β, t) sized by
/// n−k = 2·t·(β+1) so that any alignment of a β-symbol burst stays within the
/// correction radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsCode {
    pub n: usize,
    pub k: usize,
    pub class_beta: usize,
    pub class_t: usize,
    #[serde(skip)]
    gen: OnceLock<Vec<u16>>,
}

impl RsCode {
    pub fn new(n: usize, k: usize) -> Result<RsCode, CodeError> {
        if n <= k || n >= GF_ORDER {
            return Err(CodeError::ClassTooLarge {
                beta: 0,
                t: 0,
                detail: format!("invalid dimensions n={n} k={k}"),
            });
        }
        Ok(RsCode {
            n,
            k,
            class_beta: 0,
            class_t: 0,
            gen: OnceLock::new(),
        })
    }

    /// Builds the code sized for the (β, t) burst class over `msg_len`
    /// message symbols.
    pub fn with_class(beta: usize, t: usize, msg_len: usize) -> Result<RsCode, CodeError> {
        let redundancy = 2 * t * (beta + 1);
        let n = msg_len + redundancy;
        if n >= GF_ORDER {
            return Err(CodeError::ClassTooLarge {
                beta,
                t,
                detail: format!("n={n} exceeds field order"),
            });
        }
        let mut code = RsCode::new(n, msg_len)?;
        code.class_beta = beta;
        code.class_t = t;
        // t bursts of β symbols touch at most t(β+1) symbols at any alignment.
        let worst = t * (beta + 1);
        if 2 * worst > n - msg_len {
            return Err(CodeError::ClassTooLarge {
                beta,
                t,
                detail: "redundancy below 2t(β+1)".into(),
            });
        }
        Ok(code)
    }

    fn generator(&self) -> &[u16] {
        self.gen.get_or_init(|| {
            let mut g = vec![1u16];
            for i in 1..=(self.n - self.k) {
                let root = gf_pow_alpha(i);
                let mut next = vec![0u16; g.len() + 1];
                for (j, &c) in g.iter().enumerate() {
                    next[j] ^= gf_mul(c, root);
                    next[j + 1] ^= c;
                }
                g = next;
            }
            g
        })
    }

    fn syndromes(&self, word: &[u16]) -> Vec<u16> {
        let nk = self.n - self.k;
        let mut syn = vec![0u16; nk];
        for (i, s) in syn.iter_mut().enumerate() {
            // S_i = c(α^{i+1}); coefficient order: word[j] is the coefficient
            // of x^{n-1-j}.
            let x = gf_pow_alpha(i + 1);
            let mut acc = 0u16;
            for &c in word {
                acc = gf_mul(acc, x) ^ c;
            }
            *s = acc;
        }
        syn
    }
}

impl BlockCode<u16> for RsCode {
    fn block_len(&self) -> usize {
        self.n
    }

    fn msg_len(&self) -> usize {
        self.k
    }

    fn encode(&self, msg: &[u16]) -> Result<Vec<u16>, CodeError> {
        if msg.len() != self.k {
            return Err(CodeError::WrongMessageLength {
                want: self.k,
                got: msg.len(),
            });
        }
        let nk = self.n - self.k;
        let g = self.generator().to_vec();
        // Long division of msg·x^{nk} by g; remainder becomes the parity.
        let mut rem = vec![0u16; nk];
        for &m in msg {
            let coef = m ^ rem[0];
            rem.remove(0);
            rem.push(0);
            if coef != 0 {
                for (j, r) in rem.iter_mut().enumerate() {
                    // g is monic of degree nk; skip the leading coefficient.
                    *r ^= gf_mul(coef, g[nk - 1 - j]);
                }
            }
        }
        let mut out = msg.to_vec();
        out.extend_from_slice(&rem);
        Ok(out)
    }

    fn decode(&self, word: &[u16]) -> Result<Vec<u16>, CodeError> {
        if word.len() != self.n {
            return Err(CodeError::WrongLength {
                want: self.n,
                got: word.len(),
            });
        }
        let syn = self.syndromes(word);
        if syn.iter().all(|&s| s == 0) {
            return Ok(word[..self.k].to_vec());
        }
        // Berlekamp-Massey for the error locator σ(x).
        let nk = self.n - self.k;
        let mut sigma = vec![1u16];
        let mut b = vec![1u16];
        let mut l = 0usize;
        let mut m = 1usize;
        let mut bb = 1u16;
        for n_iter in 0..nk {
            let mut d = syn[n_iter];
            for i in 1..=l.min(sigma.len() - 1) {
                d ^= gf_mul(sigma[i], syn[n_iter - i]);
            }
            if d == 0 {
                m += 1;
            } else if 2 * l <= n_iter {
                let t_prev = sigma.clone();
                let coef = gf_mul(d, gf_inv(bb));
                let mut shifted = vec![0u16; m];
                shifted.extend_from_slice(&b);
                if shifted.len() > sigma.len() {
                    sigma.resize(shifted.len(), 0);
                }
                for (i, &c) in shifted.iter().enumerate() {
                    sigma[i] ^= gf_mul(coef, c);
                }
                l = n_iter + 1 - l;
                b = t_prev;
                bb = d;
                m = 1;
            } else {
                let coef = gf_mul(d, gf_inv(bb));
                let mut shifted = vec![0u16; m];
                shifted.extend_from_slice(&b);
                if shifted.len() > sigma.len() {
                    sigma.resize(shifted.len(), 0);
                }
                for (i, &c) in shifted.iter().enumerate() {
                    sigma[i] ^= gf_mul(coef, c);
                }
                m += 1;
            }
        }
        while sigma.len() > 1 && *sigma.last().unwrap() == 0 {
            sigma.pop();
        }
        let deg = sigma.len() - 1;
        if deg == 0 || deg > nk / 2 {
            return Err(CodeError::DecodeFailure(format!(
                "locator degree {deg} out of range"
            )));
        }
        // Chien search over the n code positions. Position j (coefficient of
        // x^{n-1-j}) corresponds to locator root α^{-(n-1-j)}.
        let mut error_pos = Vec::new();
        for j in 0..self.n {
            let e = self.n - 1 - j;
            let x_inv = gf_pow_alpha((GF_ORDER - 1) - (e % (GF_ORDER - 1)));
            let mut acc = 0u16;
            let mut xp = 1u16;
            for &c in &sigma {
                acc ^= gf_mul(c, xp);
                xp = gf_mul(xp, x_inv);
            }
            if acc == 0 {
                error_pos.push(j);
            }
        }
        if error_pos.len() != deg {
            return Err(CodeError::DecodeFailure(format!(
                "locator roots {} != degree {deg}",
                error_pos.len()
            )));
        }
        // Forney: Ω(x) = S(x)σ(x) mod x^{nk}, magnitude = Ω(X^{-1})/σ'(X^{-1}).
        let mut omega = vec![0u16; nk];
        for (i, o) in omega.iter_mut().enumerate() {
            let mut acc = 0u16;
            for j in 0..=i.min(sigma.len() - 1) {
                acc ^= gf_mul(sigma[j], syn[i - j]);
            }
            *o = acc;
        }
        let mut fixed = word.to_vec();
        for &j in &error_pos {
            let e = self.n - 1 - j;
            let x_inv = gf_pow_alpha((GF_ORDER - 1) - (e % (GF_ORDER - 1)));
            let mut om = 0u16;
            let mut xp = 1u16;
            for &c in &omega {
                om ^= gf_mul(c, xp);
                xp = gf_mul(xp, x_inv);
            }
            // σ'(x): odd-degree terms of σ.
            let mut dp = 0u16;
            let mut xp = 1u16;
            for i in (1..sigma.len()).step_by(2) {
                dp ^= gf_mul(sigma[i], xp);
                xp = gf_mul(xp, gf_mul(x_inv, x_inv));
            }
            if dp == 0 {
                return Err(CodeError::DecodeFailure("zero derivative in Forney".into()));
            }
            let mag = gf_mul(om, gf_inv(dp));
            fixed[j] ^= mag;
        }
        if self.syndromes(&fixed).iter().any(|&s| s != 0) {
            return Err(CodeError::DecodeFailure(
                "post-correction syndromes nonzero".into(),
            ));
        }
        Ok(fixed[..self.k].to_vec())
    }

    fn declared_class(&self) -> Option<(usize, usize)> {
        if self.class_t > 0 {
            Some((self.class_beta, self.class_t))
        } else {
            None
        }
    }
}

/// Round-robin interleaving of `depth` RS codewords into one word, so a
/// contiguous burst of β symbols spreads ≤ ⌈β/depth⌉+1 errors into each row
/// (the per-colony segment scheme keeping codec cost near-linear).
#[derive(Debug, Clone)]
pub struct InterleavedRs {
    pub inner: RsCode,
    pub depth: usize,
}

impl InterleavedRs {
    pub fn new(inner: RsCode, depth: usize) -> InterleavedRs {
        assert!(depth >= 1);
        InterleavedRs { inner, depth }
    }
}

impl BlockCode<u16> for InterleavedRs {
    fn block_len(&self) -> usize {
        self.inner.n * self.depth
    }

    fn msg_len(&self) -> usize {
        self.inner.k * self.depth
    }

    fn encode(&self, msg: &[u16]) -> Result<Vec<u16>, CodeError> {
        if msg.len() != self.msg_len() {
            return Err(CodeError::WrongMessageLength {
                want: self.msg_len(),
                got: msg.len(),
            });
        }
        let mut rows = Vec::new();
        for r in 0..self.depth {
            let row: Vec<u16> = msg.iter().skip(r).step_by(self.depth).copied().collect();
            rows.push(self.inner.encode(&row)?);
        }
        let mut out = vec![0u16; self.block_len()];
        for (r, row) in rows.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                out[i * self.depth + r] = v;
            }
        }
        Ok(out)
    }

    fn decode(&self, word: &[u16]) -> Result<Vec<u16>, CodeError> {
        if word.len() != self.block_len() {
            return Err(CodeError::WrongLength {
                want: self.block_len(),
                got: word.len(),
            });
        }
        let mut msg = vec![0u16; self.msg_len()];
        for r in 0..self.depth {
            let row: Vec<u16> = word.iter().skip(r).step_by(self.depth).copied().collect();
            let decoded = self.inner.decode(&row)?;
            for (i, &v) in decoded.iter().enumerate() {
                msg[i * self.depth + r] = v;
            }
        }
        Ok(msg)
    }

    fn declared_class(&self) -> Option<(usize, usize)> {
        let (beta, t) = self.inner.declared_class()?;
        Some((beta * self.depth, t))
    }
}

// ---------------------------------------------------------------------------
// Compliance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub compliant: bool,
    pub r_allowed: usize,
    /// Minimal number of ≤β-bursts covering the disagreement with the nearest
    /// codeword found; None when no codeword was recoverable.
    pub bursts_needed: Option<usize>,
    pub ambiguous: bool,
    pub mismatch_runs: Vec<(usize, usize)>,
}

/// Minimal bursts of length ≤ beta covering the mismatch positions.
fn burst_cover(mismatches: &[usize], beta: usize) -> (usize, Vec<(usize, usize)>) {
    let mut runs = Vec::new();
    let mut count = 0usize;
    let mut i = 0usize;
    while i < mismatches.len() {
        let start = mismatches[i];
        let mut end = start;
        while i < mismatches.len() && mismatches[i] < start + beta {
            end = mismatches[i];
            i += 1;
        }
        runs.push((start, end));
        count += 1;
    }
    (count, runs)
}

/// Decoder-witness compliance: decode, re-encode, and cover the disagreement
/// with bursts.
pub fn compliance_check<S: Clone + Eq>(
    code: &dyn BlockCode<S>,
    word: &[S],
    r: usize,
    beta: usize,
) -> ComplianceReport {
    match code.decode(word).and_then(|msg| code.encode(&msg)) {
        Ok(cw) => {
            let mismatches: Vec<usize> = (0..word.len()).filter(|&i| word[i] != cw[i]).collect();
            let (need, runs) = burst_cover(&mismatches, beta.max(1));
            ComplianceReport {
                compliant: need <= r,
                r_allowed: r,
                bursts_needed: Some(need),
                ambiguous: false,
                mismatch_runs: runs,
            }
        }
        Err(_) => ComplianceReport {
            compliant: false,
            r_allowed: r,
            bursts_needed: None,
            ambiguous: false,
            mismatch_runs: Vec::new(),
        },
    }
}

/// Exact compliance for binary repetition codes: brute force over all
/// codewords, flagging equidistant ties.
pub fn compliance_exact_binary(
    code: &RepetitionCode,
    word: &[u8],
    r: usize,
    beta: usize,
) -> ComplianceReport {
    let m = code.msg_len;
    let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
    let mut ambiguous = false;
    for bits in 0..(1u64 << m) {
        let msg: Vec<u8> = (0..m).map(|i| ((bits >> i) & 1) as u8).collect();
        let cw = BlockCode::<u8>::encode(code, &msg).unwrap();
        let mismatches: Vec<usize> = (0..word.len()).filter(|&i| word[i] != cw[i]).collect();
        let (need, runs) = burst_cover(&mismatches, beta.max(1));
        match &best {
            None => best = Some((need, runs)),
            Some((n, _)) if need < *n => {
                best = Some((need, runs));
                ambiguous = false;
            }
            Some((n, _)) if need == *n && need > 0 => ambiguous = true,
            _ => {}
        }
    }
    let (need, runs) = best.unwrap();
    ComplianceReport {
        compliant: need <= r,
        r_allowed: r,
        bursts_needed: Some(need),
        ambiguous,
        mismatch_runs: runs,
    }
}

// ---------------------------------------------------------------------------
// ψ: the padded colony code over Info symbols
// ---------------------------------------------------------------------------

/// Info-symbol alphabet of the colony code.
pub type InfoSym = u128;

/// ψ: pack a simulated cell symbol into payload words, protect with the
/// 5-fold repetition code, and pad both ends with PadLen zero symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiCode {
    pub q: usize,
    pub pad_len: usize,
    pub rep: RepetitionCode,
}

impl PsiCode {
    pub fn for_params(p: &ParamSet) -> Result<PsiCode, CodeError> {
        let q = p.q as usize;
        let pad_len = p.pad_len as usize;
        let interior = q - 2 * pad_len;
        Ok(PsiCode {
            q,
            pad_len,
            rep: RepetitionCode::new(5, interior)?,
        })
    }

    /// Payload capacity in bytes: msg_len u128 words, one length byte.
    pub fn capacity_bytes(&self) -> usize {
        self.rep.msg_len * 16 - 1
    }

    fn bytes_to_words(&self, bytes: &[u8]) -> Result<Vec<InfoSym>, CodeError> {
        if bytes.len() > self.capacity_bytes() {
            return Err(CodeError::CapacityExceeded(self.capacity_bytes()));
        }
        let mut buf = vec![0u8; self.rep.msg_len * 16];
        buf[0] = bytes.len() as u8;
        buf[1..=bytes.len()].copy_from_slice(bytes);
        Ok(buf
            .chunks(16)
            .map(|c| {
                let mut w = [0u8; 16];
                w.copy_from_slice(c);
                u128::from_le_bytes(w)
            })
            .collect())
    }

    fn words_to_bytes(&self, words: &[InfoSym]) -> Result<Vec<u8>, CodeError> {
        let mut buf = Vec::with_capacity(words.len() * 16);
        for w in words {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        let len = buf[0] as usize;
        if len + 1 > buf.len() {
            return Err(CodeError::DecodeFailure("bad payload length byte".into()));
        }
        Ok(buf[1..=len].to_vec())
    }

    /// ψ_*(a) = 0^PadLen υ_*(a) 0^PadLen over the Info alphabet.
    pub fn encode_symbol(&self, a: &CellSymbol) -> Result<Vec<InfoSym>, CodeError> {
        let words = self.bytes_to_words(&pack_symbol(a))?;
        let inner = self.rep.encode(&words)?;
        let mut out = vec![0u128; self.pad_len];
        out.extend(inner);
        out.extend(vec![0u128; self.pad_len]);
        Ok(out)
    }

    /// Strips PadLen symbols from both ends, then decodes υ*.
    pub fn decode_word(&self, word: &[InfoSym]) -> Result<CellSymbol, CodeError> {
        if word.len() != self.q {
            return Err(CodeError::WrongLength {
                want: self.q,
                got: word.len(),
            });
        }
        let interior = &word[self.pad_len..self.q - self.pad_len];
        let words = self.rep.decode(interior)?;
        let bytes = self.words_to_bytes(&words)?;
        unpack_symbol(&bytes).map_err(|e| CodeError::DecodeFailure(e.to_string()))
    }

    /// Decodes from the interior only (already stripped).
    pub fn decode_interior(&self, interior: &[InfoSym]) -> Result<CellSymbol, CodeError> {
        if interior.len() != self.rep.msg_len * 5 {
            return Err(CodeError::WrongLength {
                want: self.rep.msg_len * 5,
                got: interior.len(),
            });
        }
        let words = self.rep.decode(interior)?;
        let bytes = self.words_to_bytes(&words)?;
        unpack_symbol(&bytes).map_err(|e| CodeError::DecodeFailure(e.to_string()))
    }

    /// Interior compliance of a colony word (pads ignored).
    pub fn compliance(&self, interior: &[InfoSym], r: usize, beta: usize) -> ComplianceReport {
        compliance_check(&self.rep, interior, r, beta)
    }
}

// ---------------------------------------------------------------------------
// φ: the configuration code
// ---------------------------------------------------------------------------

/// Encodes a configuration of the simulated machine into colonies: cell i of
/// the simulated tape becomes the colony at [i·B2, (i+1)·B2), Info carrying
/// ψ of the simulated symbol and the remaining tracks initialized (Addr
/// ascending, Age = Sweep = 0, Kind = Member for the base pair and Outer
/// elsewhere, Drift toward the base pair, Pass = 0, scratch undefined).
pub fn phi_encode(
    src: &Configuration,
    psi: &PsiCode,
    p: &ParamSet,
) -> Result<Configuration, CodeError> {
    let b1 = p.b;
    let b2 = b1 * p.q as i64;
    if src.cur.0 != src.pos - b2 || src.cur.1 != src.pos {
        return Err(CodeError::NonCanonicalCur);
    }
    let mut tape = Tape::new(b1);
    let base0 = src.cur.0;
    let base1 = src.cur.1;
    let ppc = p.payload_per_cell as usize;
    for (cpos, sym) in src.tape.iter() {
        let cell = match sym {
            Symbol::Bad => continue,
            Symbol::Cell(c) => c,
        };
        debug_assert!(cpos % b2 == 0, "simulated cells sit on colony boundaries");
        let word = psi.encode_symbol(cell)?;
        let member = if cpos == base0 {
            Some(Kind::Member0)
        } else if cpos == base1 {
            Some(Kind::Member1)
        } else {
            None
        };
        for i in 0..p.q as usize {
            let mut lc = CellSymbol::blank(member.unwrap_or(Kind::Outer));
            lc.proc_ind = Some(Proc::Simulate);
            lc.info = Some(word[i]);
            lc.addr = i as i64;
            lc.age = 0;
            lc.sweep = 0;
            lc.pass = 0;
            // Drift points toward the base pair.
            lc.drift = if cpos < base0 {
                1
            } else if cpos > base1 {
                -1
            } else if cpos == base0 {
                1
            } else {
                -1
            };
            // Payload duplication: cell i carries slots [i·P, (i+1)·P).
            let lo = i * ppc;
            let hi = lo + ppc;
            lc.payload.tape = (lo..hi)
                .map(|s| cell.payload.tape.get(s).copied().flatten())
                .collect();
            if let Some(pp) = cell.payload.pos {
                if (pp.offset as usize) >= lo && (pp.offset as usize) < hi {
                    lc.payload.pos = Some(pp);
                }
            }
            tape.set(cpos + (i as i64) * b1, Symbol::Cell(lc))?;
        }
    }
    Ok(Configuration {
        tape,
        pos: src.pos,
        cur: (src.pos - b1, src.pos),
    })
}

/// Reads the interior Info word of the colony starting at `start`.
pub fn colony_interior_word(
    cfg: &Configuration,
    start: i64,
    psi: &PsiCode,
    p: &ParamSet,
) -> Option<Vec<InfoSym>> {
    let b1 = p.b;
    let mut out = Vec::with_capacity(psi.rep.msg_len * 5);
    for i in (p.pad_len as i64)..(p.q as i64 - p.pad_len as i64) {
        let cell = cfg.tape.get_cell(start + i * b1)?;
        out.push(cell.info?);
    }
    Some(out)
}

/// Decodes the simulated symbol from the colony at `start`; plain φ* inverse.
pub fn phi_decode_colony(
    cfg: &Configuration,
    start: i64,
    psi: &PsiCode,
    p: &ParamSet,
) -> Result<CellSymbol, CodeError> {
    let interior = colony_interior_word(cfg, start, psi, p)
        .ok_or_else(|| CodeError::DecodeFailure("colony has gaps or undefined Info".into()))?;
    psi.decode_interior(&interior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::PayloadPos;

    #[test]
    fn repetition_q6_round_trip_and_majority() {
        let code = RepetitionCode::new(3, 6).unwrap();
        let msg = vec![0u8, 1];
        let cw = BlockCode::<u8>::encode(&code, &msg).unwrap();
        assert_eq!(cw, vec![0, 1, 0, 1, 0, 1]);
        assert_eq!(BlockCode::<u8>::decode(&code, &cw).unwrap(), msg);
        // Single burst of length 1 at position 0: "11" "01" "01".
        let corrupted = vec![1u8, 1, 0, 1, 0, 1];
        assert_eq!(BlockCode::<u8>::decode(&code, &corrupted).unwrap(), msg);
    }

    #[test]
    fn repetition_exhaustive_single_bursts_q6() {
        let code = RepetitionCode::new(3, 6).unwrap();
        let beta = 2;
        for bits in 0..4u8 {
            let msg = vec![bits & 1, (bits >> 1) & 1];
            let cw = BlockCode::<u8>::encode(&code, &msg).unwrap();
            for start in 0..6usize {
                for len in 1..=beta {
                    if start + len > 6 {
                        continue;
                    }
                    for pat in 1..(1u8 << len) {
                        let mut w = cw.clone();
                        for i in 0..len {
                            w[start + i] ^= (pat >> i) & 1;
                        }
                        assert_eq!(
                            BlockCode::<u8>::decode(&code, &w).unwrap(),
                            msg,
                            "burst at {start} len {len}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn repetition_five_corrects_two_bursts() {
        let code = RepetitionCode::new(5, 10).unwrap();
        let msg = vec![7u8, 9];
        let cw = BlockCode::<u8>::encode(&code, &msg).unwrap();
        let mut w = cw.clone();
        // Two bursts of length ≤ 2.
        w[0] = 99;
        w[1] = 98;
        w[6] = 97;
        assert_eq!(BlockCode::<u8>::decode(&code, &w).unwrap(), msg);
    }

    #[test]
    fn rs_round_trip_random() {
        let code = RsCode::with_class(4, 3, 30).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let msg: Vec<u16> = (0..30).map(|_| rng.gen()).collect();
            let cw = code.encode(&msg).unwrap();
            assert_eq!(code.decode(&cw).unwrap(), msg);
        }
    }

    #[test]
    fn rs_corrects_declared_bursts() {
        let code = RsCode::with_class(4, 3, 30).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let msg: Vec<u16> = (0..30).map(|_| rng.gen()).collect();
            let mut w = code.encode(&msg).unwrap();
            for _ in 0..3 {
                let start = rng.gen_range(0..w.len() - 4);
                for i in 0..4 {
                    w[start + i] = rng.gen();
                }
            }
            assert_eq!(code.decode(&w).unwrap(), msg, "3 bursts of 4 must correct");
        }
    }

    #[test]
    fn rs_beyond_class_no_crash() {
        let code = RsCode::with_class(4, 3, 30).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let msg: Vec<u16> = (0..30).map(|_| rng.gen()).collect();
            let mut w = code.encode(&msg).unwrap();
            for _ in 0..4 {
                let start = rng.gen_range(0..w.len() - 4);
                for i in 0..4 {
                    w[start + i] = rng.gen();
                }
            }
            let _ = code.decode(&w); // failure or wrong output, never a crash
        }
    }

    #[test]
    fn interleaved_rs_spreads_bursts() {
        let inner = RsCode::with_class(2, 2, 8).unwrap();
        let code = InterleavedRs::new(inner, 4);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let msg: Vec<u16> = (0..code.msg_len()).map(|_| rng.gen()).collect();
        let mut w = code.encode(&msg).unwrap();
        // One long burst of depth·β symbols.
        for i in 10..18 {
            w[i] = rng.gen();
        }
        assert_eq!(code.decode(&w).unwrap(), msg);
    }

    #[test]
    fn compliance_exact_codeword_and_single_flip() {
        let code = RepetitionCode::new(3, 6).unwrap();
        let cw = BlockCode::<u8>::encode(&code, &[0, 1]).unwrap();
        let rep = compliance_exact_binary(&code, &cw, 0, 2);
        assert!(rep.compliant);
        let mut w = cw.clone();
        w[2] ^= 1;
        let rep = compliance_exact_binary(&code, &w, 0, 2);
        assert!(!rep.compliant);
        let rep = compliance_exact_binary(&code, &w, 1, 2);
        assert!(rep.compliant);
    }

    #[test]
    fn compliance_flags_equidistant_ambiguity() {
        let code = RepetitionCode::new(3, 6).unwrap();
        // Brute-force search for a word equidistant (in burst count) from two
        // codewords at minimal distance.
        let mut found = false;
        'outer: for bits in 0..64u8 {
            let w: Vec<u8> = (0..6).map(|i| (bits >> i) & 1).collect();
            let rep = compliance_exact_binary(&code, &w, 3, 2);
            if rep.ambiguous && rep.bursts_needed.unwrap_or(0) > 0 {
                found = true;
                break 'outer;
            }
        }
        assert!(found, "an equidistant word exists at Q=6");
    }

    fn toy_psi() -> (PsiCode, ParamSet) {
        let p = ParamSet::toy();
        (PsiCode::for_params(&p).unwrap(), p)
    }

    #[test]
    fn psi_pad_and_round_trip() {
        let (psi, _) = toy_psi();
        let mut a = CellSymbol::blank(Kind::Booting);
        a.addr = 15;
        a.payload.tape = vec![Some(1), None];
        a.payload.pos = Some(PayloadPos {
            offset: 1,
            side: 0,
            state: 0,
        });
        let word = psi.encode_symbol(&a).unwrap();
        assert_eq!(word.len(), 16);
        assert!(word[..3].iter().all(|&w| w == 0), "left pad is zero");
        assert!(word[13..].iter().all(|&w| w == 0), "right pad is zero");
        assert_eq!(psi.decode_word(&word).unwrap(), a);
    }

    #[test]
    fn psi_pads_carry_no_information() {
        let (psi, _) = toy_psi();
        let a = CellSymbol::blank(Kind::Stem);
        let mut word = psi.encode_symbol(&a).unwrap();
        for i in 0..3 {
            word[i] = u128::MAX - i as u128;
            word[15 - i] = 12345 + i as u128;
        }
        assert_eq!(psi.decode_word(&word).unwrap(), a);
    }

    #[test]
    fn psi_corrects_interior_bursts() {
        let (psi, _) = toy_psi();
        let mut a = CellSymbol::blank(Kind::Member1);
        a.info = Some(777);
        a.age = 12;
        let word = psi.encode_symbol(&a).unwrap();
        let mut w = word.clone();
        // Two bursts of length ≤ 2 inside the interior.
        w[4] ^= 0xff;
        w[5] ^= 0xabc;
        w[9] ^= 1;
        assert_eq!(psi.decode_word(&w).unwrap(), a);
    }

    #[test]
    fn new_state_encodings_are_simple() {
        // new_0 / new_1 colony words use only the pad symbol and one other
        // value per payload slot, so one pass with a small table writes them.
        let (psi, _) = toy_psi();
        for pass in 0..2u8 {
            let word = psi.encode_symbol(&CellSymbol::new_state(pass)).unwrap();
            let distinct: std::collections::BTreeSet<u128> = word.iter().copied().collect();
            assert!(distinct.len() <= 3, "new_{pass} uses {} symbols", distinct.len());
        }
    }

    #[test]
    fn phi_encode_single_cell_and_round_trip() {
        let (psi, p) = toy_psi();
        let b2 = p.b * p.q as i64;
        let mut src_tape = Tape::new(b2);
        let mut sym = CellSymbol::blank(Kind::Booting);
        sym.addr = 0;
        sym.payload.tape = vec![Some(1); 32];
        src_tape.set(0, Symbol::Cell(sym.clone())).unwrap();
        src_tape
            .set(-b2, Symbol::Cell(CellSymbol::blank(Kind::Booting)))
            .unwrap();
        let src = Configuration::new(src_tape, 0, (-b2, 0));
        let enc = phi_encode(&src, &psi, &p).unwrap();
        // Addresses ascend 0..Q-1 in each colony.
        for i in 0..16 {
            let c = enc.tape.get_cell(i).unwrap();
            assert_eq!(c.addr, i);
            assert_eq!(c.kind, Kind::Member1);
        }
        assert_eq!(enc.tape.get_cell(-16).unwrap().kind, Kind::Member0);
        // Round trip through the colony decode.
        let back = phi_decode_colony(&enc, 0, &psi, &p).unwrap();
        assert_eq!(back, sym);
    }

    #[test]
    fn phi_rejects_noncanonical_cur() {
        let (psi, p) = toy_psi();
        let b2 = p.b * p.q as i64;
        let mut src_tape = Tape::new(b2);
        src_tape
            .set(0, Symbol::Cell(CellSymbol::blank(Kind::Booting)))
            .unwrap();
        let src = Configuration::new(src_tape, 0, (0, b2));
        assert!(matches!(
            phi_encode(&src, &psi, &p),
            Err(CodeError::NonCanonicalCur)
        ));
    }
}
