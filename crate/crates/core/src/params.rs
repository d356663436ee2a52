//! Level parameters, profiles, and the hierarchical schedule.
//!
//! A [`ParamSet`] carries one level's constants. The paper-faithful profile
//! enforces the defining equations and inequalities; the toy profile pins
//! small executable values and reports every waived relation, so that run
//! manifests record exactly which constraints the run does not satisfy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relations checked by [`ParamSet::validate`]. Each is either satisfied or
/// listed as waived (toy mode) / an error (paper-faithful mode).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub satisfied: bool,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("paper-faithful profile violates {0}: {1}")]
    Violated(String, String),
    #[error("invalid profile constant: {0}")]
    BadConstant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    Toy,
    PaperFaithful,
}

/// One level's constants.
///
/// Names follow the roles: `b` cell body size, `q` colony size, `t_dwell`
/// dwell bound, `u_steps` work-period step bound, `pi` cleaning passes,
/// `q_esc` escape factor, `z` zig depth, `f_big` big-turn feathering unit,
/// `delta` ambiguity scale, `pad_len` colony padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub kind: ProfileKind,
    pub level: u32,
    pub b: i64,
    pub q: u32,
    pub t_dwell: u64,
    pub s_time: u64,
    pub u_steps: u64,
    pub pi: u32,
    pub q_esc: u64,
    pub z: u32,
    pub f_big: u32,
    pub delta: u32,
    pub pad_len: u32,
    pub beta: u32,
    pub gamma: u32,
    pub spill: u32,
    pub marg: u32,
    pub rebuild_c: u32,
    pub bndr: u32,
    pub stain: u32,
    pub beta_prime: u32,
    pub rho: f64,
    pub substantial_cells: u32,
    pub overshoot_cells: u32,
    pub big_turn_starvation: u32,
    pub small_turn_starvation: u32,
    pub relief: u32,
    /// G-tape cells carried in the payload segment of one cell at this level.
    pub payload_per_cell: u32,
}

impl ParamSet {
    /// The executable toy profile: Q=16 colonies, level-1 bodies of size 1.
    pub fn toy() -> ParamSet {
        let z: u32 = 4;
        let f_big: u32 = 8;
        let delta: u32 = 8;
        let log_q = 4; // log2(16)
        ParamSet {
            kind: ProfileKind::Toy,
            level: 1,
            b: 1,
            q: 16,
            t_dwell: 48,
            s_time: 48 * 4000,
            u_steps: 200_000,
            pi: 6,
            q_esc: 4000,
            z,
            f_big,
            delta,
            pad_len: 3,
            beta: 1,
            gamma: 8,
            spill: 2,
            marg: 2,
            rebuild_c: 8,
            bndr: 5,
            stain: 3,
            beta_prime: 3,
            rho: 0.125,
            substantial_cells: 4,
            overshoot_cells: 24,
            big_turn_starvation: 24,
            small_turn_starvation: 3 * delta,
            relief: 4,
            payload_per_cell: 2,
        }
    }

    /// Paper-faithful constants for validation-only arithmetic. Not executable
    /// at desk scale (the derived values are astronomically large).
    pub fn paper_faithful() -> ParamSet {
        let pi: u32 = 6;
        let rho = 0.125;
        let z = (pi as f64).powf(2.0 + rho).ceil() as u32; // Z = π^{2+ρ}
        let f_big = (z as f64 * (pi as f64).powf(2.0 + rho)).ceil() as u32;
        let spill: u32 = 8;
        let marg: u32 = 8;
        let gamma: u32 = 65; // smallest integer with γ > 4(marg+spill)
        let beta: u32 = 3 * gamma; // β ≥ 3γ
        let beta_prime = beta + 2 * spill;
        let stain = 2 * beta_prime + 1;
        let bndr: u32 = 5;
        let delta = (4 * bndr + 9) * stain * beta;
        // Q must leave a nonempty interior after 2·PadLen cells of padding.
        let q: u32 = 1 << 19;
        let log_q = 19;
        let pad_len = 4 * f_big * log_q;
        ParamSet {
            kind: ProfileKind::PaperFaithful,
            level: 1,
            b: 1,
            q,
            t_dwell: 64,
            s_time: 64 * 1_000_000,
            u_steps: 1 << 40,
            pi,
            q_esc: 1_000_000,
            z,
            f_big,
            delta,
            pad_len,
            beta,
            gamma,
            spill,
            marg,
            rebuild_c: 8,
            bndr,
            stain,
            beta_prime,
            rho,
            substantial_cells: 4 * stain * beta,
            overshoot_cells: 3 * f_big * log_q,
            big_turn_starvation: 3 * f_big * log_q,
            small_turn_starvation: 3 * delta,
            relief: 4,
            payload_per_cell: 4,
        }
    }

    /// Number of interior (information-carrying) cells of a colony.
    pub fn interior_len(&self) -> u32 {
        self.q.saturating_sub(2 * self.pad_len)
    }

    /// Checks every defining relation. Paper-faithful profiles must satisfy
    /// all of them; toy profiles collect the waivers.
    pub fn validate(&self) -> Result<Vec<ParamCheck>, ParamError> {
        let mut checks = Vec::new();
        let mut push = |name: &str, satisfied: bool, detail: String| {
            checks.push(ParamCheck {
                name: name.to_string(),
                satisfied,
                detail,
            });
        };

        let z_formula = (self.pi as f64).powf(2.0 + self.rho);
        push(
            "Z = pi^(2+rho)",
            (self.z as f64 - z_formula).abs() < 1.0,
            format!("z={} formula={:.1}", self.z, z_formula),
        );
        let f_formula = self.z as f64 * (self.pi as f64).powf(2.0 + self.rho);
        push(
            "F = Z*pi^(2+rho)",
            (self.f_big as f64 - f_formula).abs() < 1.0,
            format!("f={} formula={:.1}", self.f_big, f_formula),
        );
        let log_q = (self.q as f64).log2();
        let pad_formula = 4.0 * self.f_big as f64 * log_q;
        push(
            "PadLen = 4*F*log2(Q)",
            (self.pad_len as f64 - pad_formula).abs() < 1.0,
            format!("pad={} formula={:.0}", self.pad_len, pad_formula),
        );
        push(
            "beta' = beta + 2*spill",
            self.beta_prime == self.beta + 2 * self.spill,
            format!("beta'={}", self.beta_prime),
        );
        push(
            "stain = 2*beta' + 1",
            self.stain == 2 * self.beta_prime + 1,
            format!("stain={}", self.stain),
        );
        let delta_formula = (4 * self.bndr as u64 + 9) * self.stain as u64 * self.beta as u64;
        push(
            "Delta = (4*bndr+9)*stain*beta",
            self.delta as u64 == delta_formula,
            format!("delta={} formula={}", self.delta, delta_formula),
        );
        push(
            "gamma > 4*(marg+spill)",
            self.gamma > 4 * (self.marg + self.spill),
            format!("gamma={}", self.gamma),
        );
        push(
            "beta >= 3*gamma",
            self.beta >= 3 * self.gamma,
            format!("beta={} gamma={}", self.beta, self.gamma),
        );
        push(
            "0 < rho < 1/4",
            self.rho > 0.0 && self.rho < 0.25,
            format!("rho={}", self.rho),
        );
        push(
            "substantial = 4*stain*beta",
            self.substantial_cells as u64 == 4 * self.stain as u64 * self.beta as u64,
            format!("substantial={}", self.substantial_cells),
        );
        push("Rebuild = 8", self.rebuild_c == 8, format!("{}", self.rebuild_c));
        push("bndr = 5", self.bndr == 5, format!("{}", self.bndr));
        push(
            "interior nonempty",
            self.interior_len() > 0,
            format!("interior={}", self.interior_len()),
        );
        if self.kind == ProfileKind::Toy {
            push(
                "interior divisible by 5 (5x repetition)",
                self.interior_len() % 5 == 0,
                format!("interior={}", self.interior_len()),
            );
        }

        if self.kind == ProfileKind::PaperFaithful {
            if let Some(bad) = checks.iter().find(|c| !c.satisfied) {
                return Err(ParamError::Violated(bad.name.clone(), bad.detail.clone()));
            }
        }
        Ok(checks)
    }

    pub fn waivers(&self) -> Vec<ParamCheck> {
        self.validate()
            .map(|cs| cs.into_iter().filter(|c| !c.satisfied).collect())
            .unwrap_or_default()
    }
}

/// Hierarchy schedule constants (Q_k = c_q·2^{1.2^k}, π_k = 5k + c_pi,
/// q_k = esc·Q_{k−1}·π_{k−1}, U_k = c_u·Q_k·π_k^9).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub c_q: f64,
    pub c_pi: f64,
    pub c_u: f64,
    pub esc: f64,
    pub b1: f64,
    pub t1: f64,
}

impl Default for ScheduleConstants {
    fn default() -> Self {
        ScheduleConstants {
            c_q: 2.0,
            c_pi: 1.0,
            c_u: 4.0,
            esc: 2.0,
            b1: 1.0,
            t1: 32.0,
        }
    }
}

/// One row of the computed hierarchical schedule. Large entries are carried
/// as log2 values since B_k, T_k overflow any integer type quickly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelRow {
    pub k: u32,
    pub q_k: f64,
    pub pi_k: f64,
    pub q_esc_k: f64,
    pub u_k: f64,
    pub log2_b_k: f64,
    pub log2_t_k: f64,
    pub log2_s_k: f64,
    pub v_k: f64,
    /// log(Q_k·V_k)/1.5^k, the growth-condition ratio.
    pub growth_ratio: f64,
}

/// Computes the hierarchical schedule up to `k_max` and checks that the
/// growth ratio decreases over the computed range.
pub fn level_params(k_max: u32, c: &ScheduleConstants) -> Result<Vec<LevelRow>, ParamError> {
    if k_max == 0 {
        return Err(ParamError::BadConstant("k_max must be >= 1".into()));
    }
    if c.c_q <= 0.0 || c.c_u <= 0.0 || c.esc <= 0.0 {
        return Err(ParamError::BadConstant("schedule constants must be positive".into()));
    }
    let q_at = |k: u32| c.c_q * 2f64.powf(1.2f64.powi(k as i32));
    let pi_at = |k: u32| 5.0 * k as f64 + c.c_pi;
    let qesc_at = |k: u32| {
        if k <= 1 {
            c.esc
        } else {
            c.esc * q_at(k - 1) * pi_at(k - 1)
        }
    };
    let u_at = |k: u32| c.c_u * q_at(k) * pi_at(k).powi(9);

    let mut rows = Vec::new();
    let mut log2_b = c.b1.log2();
    let mut log2_t = c.t1.log2();
    let mut prev_ratio = f64::INFINITY;
    for k in 1..=k_max {
        let q_k = q_at(k);
        let u_k = u_at(k);
        let q_esc_k = qesc_at(k);
        let log2_s = log2_t + q_esc_k.log2();
        let v_k = u_k * qesc_at(k + 1) / q_esc_k;
        let ratio = (q_k * v_k).ln() / 1.5f64.powi(k as i32);
        let row = LevelRow {
            k,
            q_k,
            pi_k: pi_at(k),
            q_esc_k,
            u_k,
            log2_b_k: log2_b,
            log2_t_k: log2_t,
            log2_s_k: log2_s,
            v_k,
            growth_ratio: ratio,
        };
        if k > 2 && ratio > prev_ratio {
            return Err(ParamError::BadConstant(format!(
                "growth ratio not decreasing at k={k}: {ratio} > {prev_ratio}"
            )));
        }
        prev_ratio = ratio;
        log2_b += q_k.log2();
        log2_t += u_k.log2();
        rows.push(row);
    }
    Ok(rows)
}

/// Per-level noise-stratification radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub b: Vec<i64>,
    pub s: Vec<i64>,
    pub beta: i64,
    pub gamma: i64,
    pub toy: bool,
}

impl NoiseSchedule {
    /// Toy schedule used by the sparsity trend experiments: frozen time radii.
    pub fn toy() -> NoiseSchedule {
        NoiseSchedule {
            b: vec![1, 2, 4, 8, 16],
            s: vec![1, 1, 1, 1, 1],
            beta: 1,
            gamma: 1,
            toy: true,
        }
    }

    /// Schedule consistent with one machine level: radii grow with colony size
    /// and work-period length.
    pub fn for_machine(p: &ParamSet, levels: usize) -> NoiseSchedule {
        let mut b = Vec::new();
        let mut s = Vec::new();
        let mut bk = p.b;
        let mut sk: i64 = p.t_dwell as i64;
        for _ in 0..levels {
            b.push(bk);
            s.push(sk);
            bk = bk.saturating_mul(p.q as i64);
            sk = sk.saturating_mul(p.u_steps as i64);
        }
        NoiseSchedule {
            b,
            s,
            beta: p.beta as i64,
            gamma: p.gamma as i64,
            toy: p.kind == ProfileKind::Toy,
        }
    }

    pub fn levels(&self) -> usize {
        self.b.len()
    }

    /// Def. 4 side conditions; returns the violated ones.
    pub fn waivers(&self) -> Vec<ParamCheck> {
        let mut out = Vec::new();
        if self.beta < 3 * self.gamma {
            out.push(ParamCheck {
                name: "beta >= 3*gamma".into(),
                satisfied: false,
                detail: format!("beta={} gamma={}", self.beta, self.gamma),
            });
        }
        for k in 1..self.levels() {
            if self.b[k] < 2 * self.beta * self.b[k - 1] {
                out.push(ParamCheck {
                    name: format!("B_{}/B_{} >= 2*beta", k + 1, k),
                    satisfied: false,
                    detail: format!("{}/{}", self.b[k], self.b[k - 1]),
                });
            }
            if self.s[k] < 2 * self.beta * self.s[k - 1] {
                out.push(ParamCheck {
                    name: format!("S_{}/S_{} >= 2*beta", k + 1, k),
                    satisfied: false,
                    detail: format!("{}/{}", self.s[k], self.s[k - 1]),
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_profile_reports_waivers_without_error() {
        let p = ParamSet::toy();
        let checks = p.validate().expect("toy profile must validate");
        assert!(checks.iter().any(|c| !c.satisfied), "toy profile must waive something");
        assert!(checks
            .iter()
            .any(|c| c.name.contains("interior divisible") && c.satisfied));
        assert!(checks.iter().any(|c| c.name == "Rebuild = 8" && c.satisfied));
    }

    #[test]
    fn paper_faithful_profile_validates() {
        let p = ParamSet::paper_faithful();
        p.validate().expect("paper-faithful must satisfy all relations");
        assert!(p.waivers().is_empty());
    }

    #[test]
    fn schedule_b2_is_q1() {
        // B_1 = 1, so B_2 = Q_1 (product definition).
        let rows = level_params(3, &ScheduleConstants::default()).unwrap();
        let q1 = rows[0].q_k;
        assert!((rows[1].log2_b_k - q1.log2()).abs() < 1e-9);
    }

    #[test]
    fn schedule_doubly_exponential() {
        let rows = level_params(10, &ScheduleConstants::default()).unwrap();
        for w in rows.windows(2) {
            let ratio = w[1].q_k.log2() / w[0].q_k.log2();
            // log Q_{k+1} / log Q_k tends to 1.2 as the constant washes out.
            assert!(ratio > 1.0 && ratio < 1.45, "ratio {ratio}");
        }
    }

    #[test]
    fn toy_noise_schedule_flags_waivers() {
        let s = NoiseSchedule::toy();
        assert!(!s.waivers().is_empty());
    }
}
