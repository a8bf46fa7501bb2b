//! TAP profile `q ↦ βE⋆(q) + ½log(1-q) + F(ν_{q,2}, β)` and its
//! cross-checks against the direct solver.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{GlassError, Result};
use crate::mixture::Mixture;
use crate::parisi::{
    ground_state_energy, rs_condition, solve, CheckOutcome, ParisiMeasure, RsCondition, SolveOptions, ZeroTemperature,
    ZeroTemperatureOptions,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TapOptions {
    pub nodes: usize,
    pub lo: f64,
    pub hi: f64,
    /// Atom budget of every finite-β solve.
    pub atoms: usize,
    pub tol: f64,
    pub zero: ZeroTemperatureOptions,
    pub solve: SolveOptions,
}

impl Default for TapOptions {
    fn default() -> Self {
        TapOptions {
            nodes: 64,
            lo: 0.01,
            hi: 0.99,
            atoms: 3,
            tol: 5e-3,
            zero: ZeroTemperatureOptions::default(),
            solve: SolveOptions::default(),
        }
    }
}

impl TapOptions {
    /// Chebyshev–Lobatto nodes on `[lo, hi]`, ascending.
    pub fn grid(&self) -> Vec<f64> {
        chebyshev_grid(self.nodes, self.lo, self.hi)
    }
}

pub fn chebyshev_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| {
            let c = (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            0.5 * (lo + hi) - 0.5 * (hi - lo) * c
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapNode {
    pub q: f64,
    #[serde(rename = "E_star")]
    pub e_star: f64,
    pub entropy: f64,
    #[serde(rename = "F_limit")]
    pub f_limit: f64,
    pub total: f64,
    #[serde(skip)]
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TapProfile {
    pub beta: f64,
    pub nodes: Vec<TapNode>,
    pub sup: f64,
    pub argsup: f64,
    /// Nodes whose total is within `argmax_tol` of `sup`.
    pub argmax: Vec<f64>,
    pub argmax_tol: f64,
}

impl TapProfile {
    fn new(beta: f64, nodes: Vec<TapNode>, argmax_tol: f64) -> Self {
        let (sup, argsup) =
            nodes
                .iter()
                .map(|n| (n.total, n.q))
                .fold((f64::NEG_INFINITY, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
        let argmax = nodes.iter().filter(|n| n.total >= sup - argmax_tol).map(|n| n.q).collect();
        TapProfile { beta, nodes, sup, argsup, argmax, argmax_tol }
    }

    pub fn flagged(&self) -> bool {
        self.nodes.iter().any(|n| n.flagged)
    }

    /// Largest deviation of a stored total from the sum of its parts.
    pub fn bookkeeping_error(&self) -> f64 {
        self.nodes.iter().map(|n| (self.beta * n.e_star + n.entropy + n.f_limit - n.total).abs()).fold(0.0, f64::max)
    }

    /// Spacing of the grid around `q`: the larger of the two adjacent gaps.
    pub fn resolution_at(&self, q: f64) -> f64 {
        let i = self.nodes.partition_point(|n| n.q < q);
        let left = i.checked_sub(1).map(|j| q - self.nodes[j].q);
        let right = self.nodes.get(i).map(|n| n.q - q).filter(|&d| d > 0.0);
        let next = self.nodes.get(i + 1).map(|n| n.q - q);
        let right = right.or(next);
        [left, right].into_iter().flatten().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for n in &self.nodes {
            out.serialize(n)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `F(ν_{q,2}, β)`; at `q = 0` the section is the whole sphere.
fn restricted_mixture(m: &Mixture, q: f64) -> Result<Mixture> {
    if q == 0.0 {
        m.drop_one_spin()
    } else {
        m.restrict(q)?.drop_one_spin()
    }
}

fn cache_key(m: &Mixture) -> Vec<(u32, u64)> {
    let v = m.variance();
    m.terms().map(|(p, c)| (p, (c / v).to_bits())).collect()
}

pub fn tap_profile(m: &Mixture, beta: f64, grid: &[f64], opts: &TapOptions) -> Result<TapProfile> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(GlassError::invalid("beta", format!("must be positive, got {beta}")));
    }
    if let Some(&q) = grid.iter().find(|&&q| !(q > 0.0 && q < 1.0)) {
        return Err(GlassError::invalid("grid", format!("node {q} outside (0,1)")));
    }
    let mut qs = grid.to_vec();
    qs.sort_by(f64::total_cmp);
    qs.dedup();
    let exec = opts.solve.execution;

    // E⋆(q) scales like √ν_q(1) times the energy of the normalised inner
    // mixture, so one ladder serves every node sharing that normalisation
    let inner: Vec<Mixture> = qs.iter().map(|&q| m.inner_sphere(q)).collect::<Result<_>>()?;
    let mut unique: BTreeMap<Vec<(u32, u64)>, usize> = BTreeMap::new();
    let mut reps = Vec::new();
    for mq in &inner {
        let key = cache_key(mq);
        if let std::collections::btree_map::Entry::Vacant(e) = unique.entry(key) {
            e.insert(reps.len());
            reps.push(mq.clone());
        }
    }
    let ladders: Vec<Result<ZeroTemperature>> = exec.map_slice(&reps, |mq| ground_state_energy(mq, 1.0, &opts.zero));
    let ladders: Vec<ZeroTemperature> = ladders.into_iter().collect::<Result<_>>()?;

    let limits = exec.map_slice(&qs, |&q| {
        let r = restricted_mixture(m, q)?;
        if r.variance() == 0.0 {
            return Ok((0.0, true));
        }
        solve(&r, beta, opts.atoms, &opts.solve).map(|s| (s.value, s.converged))
    });

    let mut nodes = Vec::with_capacity(qs.len());
    for ((&q, mq), lim) in qs.iter().zip(&inner).zip(limits) {
        let (f_limit, converged) = lim?;
        let rep = &ladders[unique[&cache_key(mq)]];
        let rep_scale = reps[unique[&cache_key(mq)]].variance().sqrt();
        let e_star = rep.e_star / rep_scale * mq.variance().sqrt();
        let entropy = 0.5 * (-q).ln_1p();
        nodes.push(TapNode {
            q,
            e_star,
            entropy,
            f_limit,
            total: beta * e_star + entropy + f_limit,
            flagged: rep.flagged || !converged,
        });
    }
    Ok(TapProfile::new(beta, nodes, opts.tol))
}

/// `½β²(ν(1) - ν(q) - (1-q)ν'(q))`.
pub fn tap_rs_value(m: &Mixture, beta: f64, q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(GlassError::invalid("q_p", format!("must lie in [0,1), got {q}")));
    }
    Ok(0.5 * beta * beta * (m.value(1.0) - m.value(q) - (1.0 - q) * m.eval(q, 1)))
}

/// Same value through the section coefficients: `½β²(ν(1) - α₀² - α₁²)`.
pub fn tap_rs_value_alpha(m: &Mixture, beta: f64, q: f64) -> Result<f64> {
    if q == 0.0 {
        return Ok(0.5 * beta * beta * (m.value(1.0) - m.coeff(1)));
    }
    let r = m.restrict(q)?;
    Ok(0.5 * beta * beta * (m.value(1.0) - m.restricted_constant(q) - r.coeff(1)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TapReport {
    pub beta: f64,
    pub solver_value: f64,
    pub measure: ParisiMeasure,
    pub q_p: f64,
    pub profile_sup: f64,
    pub profile_argmax: Vec<f64>,
    /// `F(ν_{q_P,2}, β)` from the solver.
    pub f_limit_at_q_p: f64,
    pub rs_value_at_q_p: f64,
    pub rs_condition: RsCondition,
    pub tol: f64,
    pub checks: Vec<CheckOutcome>,
    pub flagged: bool,
    pub passed: bool,
    #[serde(skip)]
    pub profile: Option<TapProfile>,
}

pub fn tap_consistency(m: &Mixture, beta: f64, opts: &TapOptions) -> Result<TapReport> {
    let sol = solve(m, beta, opts.atoms, &opts.solve)?;
    let q_p = sol.measure.q_max();
    let support: Vec<f64> = sol.measure.atoms().iter().copied().filter(|&q| q > 1e-6 && q < 1.0).collect();
    let mut grid = opts.grid();
    grid.extend(&support);
    let profile = tap_profile(m, beta, &grid, opts)?;
    let tol = opts.tol;

    let margin_a = (profile.sup - sol.value).abs();
    let margin_b = support
        .iter()
        .map(|&q| {
            let d = profile.argmax.iter().map(|&a| (a - q).abs()).fold(f64::INFINITY, f64::min);
            (d - profile.resolution_at(q)).max(0.0)
        })
        .fold(0.0, f64::max);

    let f_limit_at_q_p = match profile.nodes.iter().find(|n| n.q == q_p) {
        Some(n) => n.f_limit,
        None => solve(&restricted_mixture(m, q_p)?, beta, opts.atoms, &opts.solve)?.value,
    };
    let rs_value_at_q_p = tap_rs_value(m, beta, q_p)?;
    let rs = rs_condition(m, beta, q_p)?;
    let margin_c = (f_limit_at_q_p - rs_value_at_q_p).abs();
    let checks = vec![
        CheckOutcome { name: "sup_matches_solver".into(), passed: margin_a <= tol, margin: margin_a },
        CheckOutcome { name: "support_in_argmax".into(), passed: margin_b == 0.0, margin: margin_b },
        CheckOutcome { name: "rs_value_at_q_p".into(), passed: !rs.holds || margin_c <= tol, margin: margin_c },
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(TapReport {
        beta,
        solver_value: sol.value,
        measure: sol.measure,
        q_p,
        profile_sup: profile.sup,
        profile_argmax: profile.argmax.clone(),
        f_limit_at_q_p,
        rs_value_at_q_p,
        rs_condition: rs,
        tol,
        checks,
        flagged: profile.flagged() || !sol.converged,
        passed,
        profile: Some(profile),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rs_value_forms_agree() {
        let m = Mixture::new([(1, 0.2), (2, 0.5), (3, 0.3), (5, 0.1)]).unwrap();
        for &q in &[0.0, 0.1, 0.5, 0.93] {
            let a = tap_rs_value(&m, 1.3, q).unwrap();
            let b = tap_rs_value_alpha(&m, 1.3, q).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        let two = Mixture::pure(2);
        for &q in &[0.0, 0.3, 0.8] {
            let v = tap_rs_value(&two, 0.7, q).unwrap();
            assert!((v - 0.5 * 0.49 * (1.0 - q) * (1.0 - q)).abs() < 1e-14);
        }
        assert!((tap_rs_value(&Mixture::pure(3), 2.0, 0.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn grid_shape() {
        let g = chebyshev_grid(64, 0.01, 0.99);
        assert_eq!(g.len(), 64);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[63] - 0.99).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(tap_profile(&Mixture::pure(2), 1.0, &[0.0, 0.5], &TapOptions::default()).is_err());
        assert!(tap_profile(&Mixture::pure(2), 1.0, &[0.5, 1.0], &TapOptions::default()).is_err());
    }

    #[test]
    fn rs_regime_profile() {
        let opts = TapOptions::default();
        let p = tap_profile(&Mixture::pure(2), 0.5, &opts.grid(), &opts).unwrap();
        assert!((p.sup - 0.125).abs() < 2e-3, "{}", p.sup);
        assert!(p.bookkeeping_error() < 1e-12);
        // the profile keeps increasing toward the q → 0 edge
        assert_eq!(p.argsup, p.nodes[0].q);
        let last = p.nodes.last().unwrap();
        assert!(last.total < p.sup - 0.5);
        let mut csv = Vec::new();
        p.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("q,E_star,entropy,F_limit,total\n"));
        assert_eq!(text.lines().count(), 65);
    }
}
