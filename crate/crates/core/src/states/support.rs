//! Empirical overlap supports across disorder draws and the inclusion of
//! near-ground-state pair overlaps in the Gibbs support.

use serde::{Deserialize, Serialize};

use super::OverlapMatrix;
use crate::error::{GlassError, Result};
use crate::geometry::Configuration;

/// When a draw counts `q` as charged on the Gibbs side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GibbsRule {
    /// Pair mass within `ε` of `q` above a fixed threshold.
    Mass(f64),
    /// Pair mass within `ε` of `q` above `e^{−Nδ}`.
    Exponential { dim: usize, delta: f64 },
    /// At least one pair within `ε` of `q`.
    Existence,
}

impl GibbsRule {
    fn charged(self, mass: f64) -> bool {
        match self {
            GibbsRule::Mass(t) => mass > t,
            GibbsRule::Exponential { dim, delta } => mass > (-(dim as f64) * delta).exp(),
            GibbsRule::Existence => mass > 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SupportOptions {
    pub eps: f64,
    pub grid: Vec<f64>,
    pub rule: GibbsRule,
    /// Frequency across draws at which a grid point counts as supported.
    pub level: f64,
    /// Grid points covered by the inclusion check (within `eps`); all if `None`.
    pub cover: Option<Vec<f64>>,
    pub min_draws: usize,
}

impl Default for SupportOptions {
    fn default() -> Self {
        SupportOptions {
            eps: 0.05,
            grid: (0..=200).map(|i| -1.0 + 0.01 * i as f64).collect(),
            rule: GibbsRule::Mass(0.01),
            level: 0.5,
            cover: None,
            min_draws: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRow {
    pub q: f64,
    pub gibbs_freq: f64,
    pub ground_freq: f64,
    pub covered: bool,
    pub pass: bool,
    /// `gibbs_freq − ground_freq`.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportReport {
    pub rows: Vec<SupportRow>,
    pub gibbs_draws: usize,
    pub ground_draws: usize,
    pub low_power: bool,
    pub passed: bool,
    pub level: f64,
}

impl SupportReport {
    pub fn gibbs_support(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.gibbs_freq >= self.level).map(|r| r.q).collect()
    }

    pub fn ground_support(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.ground_freq >= self.level).map(|r| r.q).collect()
    }

    /// Grid points supported on the ground side but not on the Gibbs side.
    pub fn failures(&self) -> Vec<&SupportRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }
}

/// Pair overlaps `⟨σ,σ'⟩/N` of `a × b`; with `distinct`, index-equal pairs
/// are skipped (use it when `b` is `a`).
pub fn set_overlaps(a: &[Configuration], b: &[Configuration], distinct: bool) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if distinct && i == j {
                continue;
            }
            if x.dim() != y.dim() {
                return Err(GlassError::DimensionMismatch { expected: x.dim(), got: y.dim() });
            }
            out.push(x.dot(y) / x.dim() as f64);
        }
    }
    Ok(out)
}

/// Per grid point, the frequency across draws that the Gibbs pair mass
/// within `ε` is charged, and that some near-ground pair (one overlap list
/// per draw) falls within `ε`; plus the inclusion check.
pub fn overlap_support(gibbs: &[OverlapMatrix], ground: &[Vec<f64>], opts: &SupportOptions) -> Result<SupportReport> {
    if gibbs.is_empty() {
        return Err(GlassError::invalid("gibbs", "no disorder draws"));
    }
    if !(opts.eps > 0.0) {
        return Err(GlassError::invalid("eps", "must be positive"));
    }
    if gibbs.iter().any(|m| m.len() < 2) {
        return Err(GlassError::invalid("gibbs", "every draw needs at least two replicas"));
    }
    let off: Vec<Vec<f64>> = gibbs.iter().map(|m| m.off_diagonal()).collect();
    let mut rows = Vec::with_capacity(opts.grid.len());
    for &q in &opts.grid {
        let near = |r: &f64| (r - q).abs() < opts.eps;
        let charged = off
            .iter()
            .filter(|o| opts.rule.charged(o.iter().filter(|r| near(r)).count() as f64 / o.len() as f64))
            .count();
        let gibbs_freq = charged as f64 / gibbs.len() as f64;
        let ground_freq = if ground.is_empty() {
            0.0
        } else {
            ground.iter().filter(|o| o.iter().any(near)).count() as f64 / ground.len() as f64
        };
        let covered = match &opts.cover {
            None => true,
            Some(c) => c.iter().any(|x| (x - q).abs() < opts.eps),
        };
        let pass = !covered || ground_freq < opts.level || gibbs_freq >= opts.level;
        rows.push(SupportRow { q, gibbs_freq, ground_freq, covered, pass, margin: gibbs_freq - ground_freq });
    }
    let passed = rows.iter().all(|r| r.pass);
    Ok(SupportReport {
        rows,
        gibbs_draws: gibbs.len(),
        ground_draws: ground.len(),
        low_power: gibbs.len() < opts.min_draws || (!ground.is_empty() && ground.len() < opts.min_draws),
        passed,
        level: opts.level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{overlap_matrix, planted};

    fn near(support: &[f64], q: f64) -> bool {
        support.iter().any(|x| (x - q).abs() < 1e-9)
    }

    #[test]
    fn planted_support_is_recovered() {
        let sets: Vec<Vec<Configuration>> =
            (0..12).map(|s| planted::two_level_support(64, 20, 0.6, s).unwrap()).collect();
        let gibbs: Vec<OverlapMatrix> = sets.iter().map(|p| overlap_matrix(p).unwrap()).collect();
        let ground: Vec<Vec<f64>> = sets.iter().map(|p| set_overlaps(p, p, true).unwrap()).collect();
        let rep = overlap_support(&gibbs, &ground, &SupportOptions::default()).unwrap();
        let s = rep.gibbs_support();
        assert!(near(&s, 0.0) && near(&s, 0.6));
        assert!(!near(&s, 0.3) && !near(&s, -0.6) && !near(&s, 1.0));
        assert!(s.iter().all(|q| q.abs() < 0.051 || (q - 0.6).abs() < 0.051), "{s:?}");
        assert!(rep.passed && !rep.low_power);
    }

    #[test]
    fn identical_sets_pass() {
        let sets: Vec<Vec<Configuration>> =
            (0..3).map(|s| planted::two_level_support(32, 8, 0.4, s).unwrap()).collect();
        let gibbs: Vec<OverlapMatrix> = sets.iter().map(|p| overlap_matrix(p).unwrap()).collect();
        let ground: Vec<Vec<f64>> = sets.iter().map(|p| set_overlaps(p, p, true).unwrap()).collect();
        let opts = SupportOptions { rule: GibbsRule::Existence, ..Default::default() };
        let rep = overlap_support(&gibbs, &ground, &opts).unwrap();
        assert!(rep.passed);
        assert!(rep.low_power);
        assert_eq!(rep.gibbs_support(), rep.ground_support());
    }

    #[test]
    fn uncovered_points_are_not_checked() {
        let p = planted::two_level_support(32, 8, 0.4, 0).unwrap();
        let gibbs = vec![overlap_matrix(&p).unwrap()];
        let ground = vec![vec![1.0, -1.0]];
        let rep = overlap_support(&gibbs, &ground, &SupportOptions::default()).unwrap();
        assert!(!rep.passed);
        assert!(rep.failures().iter().all(|r| r.q.abs() > 0.9));
        let cover = SupportOptions { cover: Some(vec![0.0, 0.4]), ..Default::default() };
        assert!(overlap_support(&gibbs, &ground, &cover).unwrap().passed);
        let e = GibbsRule::Exponential { dim: 128, delta: 0.01 };
        assert!(e.charged(0.3) && !e.charged(0.2));
    }
}
