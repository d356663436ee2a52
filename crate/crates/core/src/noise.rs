//! ε-bounded noise: sampling, space-time projection, stratification into
//! level residues, burst partitioning, and Monte Carlo sparsity estimation.
//!
//! All operations are exact scans over finite point sets sorted by
//! coordinates; no spatial index is needed at desk scale.

use crate::params::NoiseSchedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

/// A space-time point: position x, time t ≥ 0.
pub type Point = (i64, i64);

/// Finite set of space-time fault points.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSet {
    points: BTreeSet<Point>,
}

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("epsilon must lie in [0,1), got {0}")]
    BadEps(f64),
    #[error("negative time in noise point ({0},{1})")]
    NegativeTime(i64, i64),
    #[error("no head position recorded for fault time {0}")]
    MissingHead(i64),
    #[error("point ({0},{1}) is not in the set")]
    NotMember(i64, i64),
    #[error("radius components must be positive")]
    BadRadius,
    #[error("set is not (r,r*)-sparse: witness point ({0},{1})")]
    NotSparse(i64, i64),
    #[error("region too small for stratification margin: need {need}, got {got}")]
    RegionTooSmall { need: i64, got: i64 },
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
}

impl NoiseSet {
    pub fn new() -> NoiseSet {
        NoiseSet::default()
    }

    pub fn from_points<I: IntoIterator<Item = Point>>(pts: I) -> Result<NoiseSet, NoiseError> {
        let mut points = BTreeSet::new();
        for (x, t) in pts {
            if t < 0 {
                return Err(NoiseError::NegativeTime(x, t));
            }
            points.insert((x, t));
        }
        Ok(NoiseSet { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.points.contains(&p)
    }

    pub fn insert(&mut self, p: Point) {
        debug_assert!(p.1 >= 0);
        self.points.insert(p);
    }

    pub fn iter(&self) -> impl Iterator<Item = Point> + '_ {
        self.points.iter().copied()
    }

    /// Serialized form: sorted `x t` pairs, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (x, t) in self.iter() {
            let _ = writeln!(s, "{x} {t}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<NoiseSet, NoiseError> {
        let mut pts = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let x: i64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or(NoiseError::BadSchedule(format!("bad noise line: {line}")))?;
            let t: i64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or(NoiseError::BadSchedule(format!("bad noise line: {line}")))?;
            pts.push((x, t));
        }
        NoiseSet::from_points(pts)
    }
}

/// Rectangle "radius": space extent r1, time extent r2, both positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Radius {
    pub r1: i64,
    pub r2: i64,
}

impl Radius {
    pub fn new(r1: i64, r2: i64) -> Result<Radius, NoiseError> {
        if r1 <= 0 || r2 <= 0 {
            return Err(NoiseError::BadRadius);
        }
        Ok(Radius { r1, r2 })
    }

    pub fn scale(self, c: i64) -> Radius {
        Radius {
            r1: self.r1 * c,
            r2: self.r2 * c,
        }
    }
}

/// Open rectangle B(x, r) = { y : |y_i − x_i| < r_i }.
pub fn in_ball(center: Point, r: Radius, y: Point) -> bool {
    (y.0 - center.0).abs() < r.r1 && (y.1 - center.1).abs() < r.r2
}

/// Inclusive space-time rectangle used as a sampling region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x0: i64,
    pub x1: i64,
    pub t0: i64,
    pub t1: i64,
}

impl Region {
    pub fn cells(&self) -> i64 {
        (self.x1 - self.x0 + 1).max(0) * (self.t1 - self.t0 + 1).max(0)
    }
}

/// Independent Bernoulli(eps) noise over every point of `region`;
/// deterministic under `seed`.
pub fn sample_noise(eps: f64, region: Region, seed: u64) -> Result<NoiseSet, NoiseError> {
    if !(0.0..1.0).contains(&eps) {
        return Err(NoiseError::BadEps(eps));
    }
    if region.t0 < 0 {
        return Err(NoiseError::NegativeTime(region.x0, region.t0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = NoiseSet::new();
    for t in region.t0..=region.t1 {
        for x in region.x0..=region.x1 {
            if rng.gen_bool(eps) {
                set.insert((x, t));
            }
        }
    }
    Ok(set)
}

/// Projects fault times through the head path: {(h(t), t) : t ∈ fault_times}.
pub fn project_to_spacetime(
    fault_times: &BTreeSet<i64>,
    head_positions: impl Fn(i64) -> Option<i64>,
) -> Result<NoiseSet, NoiseError> {
    let mut set = NoiseSet::new();
    for &t in fault_times {
        if t < 0 {
            return Err(NoiseError::NegativeTime(0, t));
        }
        let h = head_positions(t).ok_or(NoiseError::MissingHead(t))?;
        set.insert((h, t));
    }
    Ok(set)
}

/// A point x of E is (r, r*)-isolated when E ∩ B(x,r*) ⊆ B(x,r).
pub fn is_isolated(x: Point, e: &NoiseSet, r: Radius, r_star: Radius) -> Result<bool, NoiseError> {
    if !e.contains(x) {
        return Err(NoiseError::NotMember(x.0, x.1));
    }
    Ok(e.iter()
        .filter(|&y| in_ball(x, r_star, y))
        .all(|y| in_ball(x, r, y)))
}

/// A burst: one equivalence class of the relation y ∈ B(x,r) on a sparse set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Burst {
    pub points: Vec<Point>,
}

impl Burst {
    pub fn bounding_extent(&self) -> (i64, i64) {
        let xs: Vec<i64> = self.points.iter().map(|p| p.0).collect();
        let ts: Vec<i64> = self.points.iter().map(|p| p.1).collect();
        (
            xs.iter().max().unwrap() - xs.iter().min().unwrap(),
            ts.iter().max().unwrap() - ts.iter().min().unwrap(),
        )
    }
}

/// Partitions an (r, r*)-sparse set into bursts and verifies both conclusions
/// of the burst lemma: each class fits an r1×r2 rectangle (strict extents),
/// and every (r1*−r1)×(r2*−r2) rectangle intersects at most one class.
pub fn partition_bursts(
    e: &NoiseSet,
    r: Radius,
    r_star: Radius,
) -> Result<Vec<Burst>, NoiseError> {
    if r_star.r1 <= 2 * r.r1 || r_star.r2 <= 2 * r.r2 {
        return Err(NoiseError::BadRadius);
    }
    for x in e.iter() {
        if !is_isolated(x, e, r, r_star)? {
            return Err(NoiseError::NotSparse(x.0, x.1));
        }
    }
    // Union classes E_x = B(x,r) ∩ E. Sparsity makes the relation transitive.
    let pts: Vec<Point> = e.iter().collect();
    let mut class: Vec<usize> = (0..pts.len()).collect();
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            if in_ball(pts[i], r, pts[j]) {
                let (a, b) = (class[i], class[j]);
                if a != b {
                    for c in class.iter_mut() {
                        if *c == b {
                            *c = a;
                        }
                    }
                }
            }
        }
    }
    let mut bursts: Vec<Burst> = Vec::new();
    let mut reps: Vec<usize> = Vec::new();
    for (i, &c) in class.iter().enumerate() {
        match reps.iter().position(|&r0| r0 == c) {
            Some(k) => bursts[k].points.push(pts[i]),
            None => {
                reps.push(c);
                bursts.push(Burst { points: vec![pts[i]] });
            }
        }
    }
    for b in &bursts {
        let (dx, dt) = b.bounding_extent();
        if dx >= r.r1 || dt >= r.r2 {
            return Err(NoiseError::NotSparse(b.points[0].0, b.points[0].1));
        }
    }
    Ok(bursts)
}

/// Brute-force check that every (r1*−r1)×(r2*−r2) rectangle on the populated
/// region intersects at most one burst. Rectangles not near any point meet no
/// class, so anchors are enumerated around the points only.
pub fn verify_burst_separation(
    bursts: &[Burst],
    r: Radius,
    r_star: Radius,
) -> Result<(), NoiseError> {
    let w = r_star.r1 - r.r1;
    let h = r_star.r2 - r.r2;
    let all: Vec<(Point, usize)> = bursts
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.points.iter().map(move |&p| (p, i)))
        .collect();
    for &((px, pt), _) in &all {
        for ax in (px - w + 1)..=px {
            for at in (pt - h + 1)..=pt {
                // rectangle [ax, ax+w) × [at, at+h)
                let mut seen: Option<usize> = None;
                for &((qx, qt), ci) in &all {
                    if qx >= ax && qx < ax + w && qt >= at && qt < at + h {
                        match seen {
                            None => seen = Some(ci),
                            Some(prev) if prev != ci => {
                                return Err(NoiseError::NotSparse(qx, qt));
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// The stratification E = E^(1) ⊇ E^(2) ⊇ … with per-level burst partitions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StratifiedNoise {
    pub schedule: NoiseSchedule,
    /// residues[k-1] = E^(k); residues[0] is the base set.
    pub residues: Vec<NoiseSet>,
    /// bursts[k-1] = burst partition of E^(k) \ E^(k+1) classes within E^(k),
    /// present only when E^(k) is sparse at its level radii.
    pub bursts: Vec<Option<Vec<Burst>>>,
    /// Smallest k with E^(k+1) empty, if observed within the schedule depth.
    pub sparse_at: Option<u32>,
}

/// Radii used when deriving E^(k+1) from E^(k).
pub fn level_radii(schedule: &NoiseSchedule, k: usize) -> Result<(Radius, Radius), NoiseError> {
    if k == 0 || k >= schedule.levels() {
        return Err(NoiseError::BadSchedule(format!(
            "level {k} outside schedule of depth {}",
            schedule.levels()
        )));
    }
    let r = Radius::new(schedule.beta * schedule.b[k - 1], schedule.beta * schedule.s[k - 1])?;
    let r_star = Radius::new(schedule.gamma * schedule.b[k], schedule.gamma * schedule.s[k])?;
    Ok((r, r_star))
}

/// Computes residues up to `k_max` by deleting, at each level, the isolated
/// points of E^(k) under the level radii.
pub fn stratify(
    e: &NoiseSet,
    schedule: &NoiseSchedule,
    k_max: u32,
) -> Result<StratifiedNoise, NoiseError> {
    if k_max as usize >= schedule.levels() {
        return Err(NoiseError::BadSchedule(format!(
            "k_max {k_max} needs schedule depth > {k_max}"
        )));
    }
    if !schedule.toy {
        let w = schedule.waivers();
        if !w.is_empty() {
            return Err(NoiseError::BadSchedule(format!(
                "paper-faithful schedule violates {}",
                w[0].name
            )));
        }
    }
    let mut residues = vec![e.clone()];
    let mut bursts = Vec::new();
    let mut sparse_at = None;
    for k in 1..=k_max as usize {
        let (r, r_star) = level_radii(schedule, k)?;
        let cur = &residues[k - 1];
        let mut next = NoiseSet::new();
        for x in cur.iter() {
            if !is_isolated(x, cur, r, r_star)? {
                next.insert(x);
            }
        }
        // The deleted points are isolated, so the full residue partitions into
        // bursts at these radii exactly when the residue itself is sparse.
        bursts.push(partition_bursts(cur, r, r_star).ok());
        if next.is_empty() && sparse_at.is_none() {
            sparse_at = Some(k as u32);
        }
        residues.push(next);
    }
    Ok(StratifiedNoise {
        schedule: schedule.clone(),
        residues,
        bursts,
        sparse_at,
    })
}

impl StratifiedNoise {
    /// E^(k), 1-based.
    pub fn residue(&self, k: u32) -> Option<&NoiseSet> {
        self.residues.get((k - 1) as usize)
    }

    /// Structured text report: level, residue size, burst count, max extent.
    pub fn report(&self) -> String {
        let mut s = String::new();
        for (i, res) in self.residues.iter().enumerate() {
            let _ = write!(s, "level {} residue {}", i + 1, res.len());
            if i < self.bursts.len() {
                match &self.bursts[i] {
                    Some(bs) => {
                        let max_ext = bs
                            .iter()
                            .map(|b| b.bounding_extent())
                            .fold((0, 0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
                        let _ = write!(s, " bursts {} max-extent {}x{}", bs.len(), max_ext.0, max_ext.1);
                    }
                    None => {
                        let _ = write!(s, " bursts n/a (not sparse at level radii)");
                    }
                }
            }
            let _ = writeln!(s);
        }
        match self.sparse_at {
            Some(k) => {
                let _ = writeln!(s, "sparse at level {k}");
            }
            None => {
                let _ = writeln!(s, "not {}-sparse", self.residues.len() - 1);
            }
        }
        s
    }
}

/// Result of the Monte Carlo level-occupation estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelFrequency {
    pub k: u32,
    pub trials: u64,
    pub hits: u64,
    pub frequency: f64,
    /// Binomial standard error of the estimated frequency.
    pub sigma: f64,
}

/// Estimates P(B(origin,(B_k,S_k)) ∩ E^(k) ≠ ∅) by sampling noise on a region
/// that covers the nested isolation margins around the ball (the residue at a
/// point depends only on points within the accumulated γ-margins).
pub fn estimate_level_probability(
    eps: f64,
    schedule: &NoiseSchedule,
    k: u32,
    trials: u64,
    seed: u64,
) -> Result<LevelFrequency, NoiseError> {
    if trials == 0 {
        return Err(NoiseError::BadSchedule("trials must be >= 1".into()));
    }
    if k == 0 || (k as usize) >= schedule.levels() {
        return Err(NoiseError::BadSchedule(format!("k={k} outside schedule")));
    }
    // Margin: ball radius plus γ·(B_{j+1},S_{j+1}) for every stratification
    // level evaluated, with a 1.5× slack per the nested-dependence bound.
    let mut margin_x = schedule.b[(k - 1) as usize];
    let mut margin_t = schedule.s[(k - 1) as usize];
    for j in 1..=k as usize {
        margin_x += (3 * schedule.gamma * schedule.b[j]) / 2;
        margin_t += (3 * schedule.gamma * schedule.s[j]) / 2;
    }
    let region = Region {
        x0: -margin_x,
        x1: margin_x,
        t0: 0,
        t1: 2 * margin_t,
    };
    let center = (0i64, margin_t);
    if region.cells() <= 0 {
        return Err(NoiseError::RegionTooSmall {
            need: 1,
            got: region.cells(),
        });
    }
    let ball = Radius::new(
        schedule.b[(k - 1) as usize].max(1),
        schedule.s[(k - 1) as usize].max(1),
    )?;
    let mut hits = 0u64;
    for trial in 0..trials {
        let e = sample_noise(eps, region, seed.wrapping_add(trial))?;
        let strat = stratify(&e, schedule, k)?;
        let res = strat.residue(k).expect("residue computed");
        if res.iter().any(|y| in_ball(center, ball, y)) {
            hits += 1;
        }
    }
    let frequency = hits as f64 / trials as f64;
    let sigma = (frequency * (1.0 - frequency) / trials as f64).sqrt();
    Ok(LevelFrequency {
        k,
        trials,
        hits,
        frequency,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radius(r1: i64, r2: i64) -> Radius {
        Radius::new(r1, r2).unwrap()
    }

    #[test]
    fn sample_eps_zero_empty() {
        let region = Region { x0: 0, x1: 9, t0: 0, t1: 9 };
        let e = sample_noise(0.0, region, 7).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn sample_deterministic_under_seed() {
        let region = Region { x0: -5, x1: 5, t0: 0, t1: 20 };
        let a = sample_noise(0.3, region, 42).unwrap();
        let b = sample_noise(0.3, region, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_noise(0.3, region, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_density_near_eps() {
        // Binomial confidence oracle: density within 3σ of eps over a large
        // sample (10^4 points via 100 trials on a 10×10 region near eps→1).
        let eps = 0.97;
        let region = Region { x0: 0, x1: 9, t0: 0, t1: 9 };
        let mut total = 0usize;
        let trials = 100;
        for s in 0..trials {
            total += sample_noise(eps, region, s).unwrap().len();
        }
        let n = (trials as f64) * 100.0;
        let mean = total as f64 / n;
        let sigma = (eps * (1.0 - eps) / n).sqrt();
        assert!((mean - eps).abs() < 3.0 * sigma, "mean {mean} eps {eps}");
    }

    #[test]
    fn project_direct_image() {
        let times: BTreeSet<i64> = [3, 7].into_iter().collect();
        let h = |t: i64| Some(match t {
            3 => 0,
            7 => -2,
            _ => 99,
        });
        let e = project_to_spacetime(&times, h).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.contains((0, 3)));
        assert!(e.contains((-2, 7)));
    }

    #[test]
    fn project_empty_and_same_position() {
        let e = project_to_spacetime(&BTreeSet::new(), |_| Some(0)).unwrap();
        assert!(e.is_empty());
        let times: BTreeSet<i64> = [1, 2].into_iter().collect();
        let e = project_to_spacetime(&times, |_| Some(5)).unwrap();
        assert_eq!(e.len(), 2);
    }

    #[test]
    fn project_missing_head_errors() {
        let times: BTreeSet<i64> = [1].into_iter().collect();
        assert_eq!(
            project_to_spacetime(&times, |_| None).unwrap_err(),
            NoiseError::MissingHead(1)
        );
    }

    #[test]
    fn isolated_singleton() {
        let e = NoiseSet::from_points([(0, 0)]).unwrap();
        assert!(is_isolated((0, 0), &e, radius(1, 1), radius(10, 10)).unwrap());
    }

    #[test]
    fn isolated_pair_with_unit_radius() {
        // B(x,(1,1)) = {x}, so two adjacent points are non-isolated both ways.
        let e = NoiseSet::from_points([(0, 0), (1, 0)]).unwrap();
        assert!(!is_isolated((0, 0), &e, radius(1, 1), radius(4, 4)).unwrap());
        assert!(!is_isolated((1, 0), &e, radius(1, 1), radius(4, 4)).unwrap());
    }

    #[test]
    fn isolated_brute_force_case() {
        let e = NoiseSet::from_points([(0, 0), (2, 1), (40, 40)]).unwrap();
        assert!(is_isolated((0, 0), &e, radius(3, 3), radius(20, 20)).unwrap());
    }

    #[test]
    fn isolated_nonmember_errors() {
        let e = NoiseSet::from_points([(0, 0)]).unwrap();
        assert!(is_isolated((5, 5), &e, radius(1, 1), radius(2, 2)).is_err());
    }

    #[test]
    fn bursts_basic_classes() {
        let e = NoiseSet::from_points([(0, 0), (1, 1), (50, 50)]).unwrap();
        let bursts = partition_bursts(&e, radius(3, 3), radius(20, 20)).unwrap();
        assert_eq!(bursts.len(), 2);
        let sizes: Vec<usize> = {
            let mut v: Vec<usize> = bursts.iter().map(|b| b.points.len()).collect();
            v.sort();
            v
        };
        assert_eq!(sizes, vec![1, 2]);
        verify_burst_separation(&bursts, radius(3, 3), radius(20, 20)).unwrap();
    }

    #[test]
    fn bursts_empty() {
        let e = NoiseSet::new();
        let bursts = partition_bursts(&e, radius(3, 3), radius(20, 20)).unwrap();
        assert!(bursts.is_empty());
    }

    #[test]
    fn stratify_singleton_sparse_at_one() {
        let e = NoiseSet::from_points([(0, 0)]).unwrap();
        let s = stratify(&e, &NoiseSchedule::toy(), 2).unwrap();
        assert!(s.residue(2).unwrap().is_empty());
        assert_eq!(s.sparse_at, Some(1));
    }

    #[test]
    fn stratify_adjacent_pair_survives() {
        // With B=(1,4), S=(1,4), β=1, γ=1 neither of two adjacent points is
        // isolated, so E^(2) = E.
        let sched = NoiseSchedule {
            b: vec![1, 4],
            s: vec![1, 4],
            beta: 1,
            gamma: 1,
            toy: true,
        };
        let e = NoiseSet::from_points([(0, 0), (1, 0)]).unwrap();
        let s = stratify(&e, &sched, 1).unwrap();
        assert_eq!(s.residue(2).unwrap(), &e);
    }

    #[test]
    fn stratify_fixed_point_of_isolation() {
        // Recomputing isolation on E^(k) with the level radii re-derives
        // exactly E^(k+1).
        let region = Region { x0: 0, x1: 60, t0: 0, t1: 60 };
        let e = sample_noise(0.05, region, 11).unwrap();
        let sched = NoiseSchedule::toy();
        let s = stratify(&e, &sched, 3).unwrap();
        for k in 1..=3usize {
            let (r, r_star) = level_radii(&sched, k).unwrap();
            let cur = s.residue(k as u32).unwrap();
            let mut expect = NoiseSet::new();
            for x in cur.iter() {
                if !is_isolated(x, cur, r, r_star).unwrap() {
                    expect.insert(x);
                }
            }
            assert_eq!(&expect, s.residue(k as u32 + 1).unwrap());
        }
    }

    #[test]
    fn level1_frequency_matches_binomial() {
        // k=1: frequency = 1−(1−eps)^{(2B1−1)(2S1−1)} = eps for unit radii.
        let sched = NoiseSchedule::toy();
        let eps = 0.05;
        let f = estimate_level_probability(eps, &sched, 1, 2000, 3).unwrap();
        let expect = eps;
        assert!(
            (f.frequency - expect).abs() < 3.0 * (expect * (1.0 - expect) / 2000.0).sqrt() + 1e-9,
            "freq {} expect {}",
            f.frequency,
            expect
        );
    }

    #[test]
    fn level_frequency_eps_zero() {
        let sched = NoiseSchedule::toy();
        for k in 1..=3 {
            let f = estimate_level_probability(0.0, &sched, k, 50, 1).unwrap();
            assert_eq!(f.hits, 0);
        }
    }

    #[test]
    fn noise_text_round_trip() {
        let e = NoiseSet::from_points([(3, 1), (-2, 9), (0, 0)]).unwrap();
        let t = e.to_text();
        assert_eq!(NoiseSet::from_text(&t).unwrap(), e);
    }
}
