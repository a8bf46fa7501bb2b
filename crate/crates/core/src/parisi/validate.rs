use serde::{Deserialize, Serialize};

use super::functional::{BoundaryProblem, FirstVariation};
use super::measure::ParisiMeasure;
use crate::error::Result;
use crate::mixture::Mixture;

const GRID: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub q: f64,
    pub weight: f64,
    /// `f(q)`
    pub f: f64,
    /// `f'(q) = F(q)`
    pub f_prime: f64,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub atoms: Vec<AtomReport>,
    pub sup_f: f64,
    pub argsup_f: f64,
    pub b: Option<f64>,
    pub tol: f64,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

/// Checks the first-order optimality conditions of a candidate measure:
/// (a) every atom maximises `f`, (b) `f'` vanishes at interior atoms,
/// (c) `Γ` vanishes on the support.
pub fn validate(x: &ParisiMeasure, m: &Mixture, beta: f64, tol: f64) -> Result<StationarityReport> {
    let fv = FirstVariation::new(x, m, beta)?;
    let bp = BoundaryProblem::new(x, m, beta)?;
    let atoms: Vec<AtomReport> = x
        .atoms()
        .iter()
        .zip(x.weights())
        .map(|(&q, &w)| AtomReport { q, weight: w, f: fv.small_f(q), f_prime: fv.big_f(q), gamma: bp.gamma(q) })
        .collect();

    let mut grid: Vec<f64> = (0..GRID).map(|i| i as f64 / GRID as f64).collect();
    grid.extend(x.atoms());
    let (mut sup_f, mut argsup_f) = (f64::NEG_INFINITY, 0.0);
    for q in grid {
        let v = fv.small_f(q);
        if v > sup_f {
            sup_f = v;
            argsup_f = q;
        }
    }

    let min_atom_f = atoms.iter().map(|a| a.f).fold(f64::INFINITY, f64::min);
    let margin_a = sup_f - min_atom_f;
    let margin_b = atoms.iter().filter(|a| a.q > 0.0).map(|a| a.f_prime.abs()).fold(0.0, f64::max);
    let margin_c =
        if bp.b().is_some() { atoms.iter().map(|a| a.gamma.unwrap().abs()).fold(0.0, f64::max) } else { f64::INFINITY };
    let checks = vec![
        CheckOutcome { name: "atoms_maximize_f".into(), passed: margin_a <= tol, margin: margin_a },
        CheckOutcome { name: "f_prime_zero_at_interior_atoms".into(), passed: margin_b <= tol, margin: margin_b },
        CheckOutcome { name: "gamma_zero_on_support".into(), passed: margin_c <= tol, margin: margin_c },
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(StationarityReport { atoms, sup_f, argsup_f, b: bp.b(), tol, checks, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsCondition {
    pub holds: bool,
    pub worst_t: f64,
    /// `sup_t β²ν_{q,2}(t) + log(1-t) + t` over the scan.
    pub margin: f64,
}

/// Scans `β²ν_{q_P,2}(t) + log(1-t) + t ≤ 0` over `t ∈ (0,1)`.
pub fn rs_condition(m: &Mixture, beta: f64, q_p: f64) -> Result<RsCondition> {
    if !(0.0..1.0).contains(&q_p) {
        return Err(crate::error::GlassError::invalid("q_p", format!("must lie in [0,1), got {q_p}")));
    }
    let restricted = if q_p == 0.0 { m.clone() } else { m.restrict(q_p)? };
    // an empty ν_{q,2} (pure one-spin) contributes nothing
    let nu2 = restricted.drop_one_spin().ok();
    let b2 = beta * beta;
    let h = |t: f64| b2 * nu2.as_ref().map_or(0.0, |n| n.value(t)) + (-t).ln_1p() + t;

    let mut ts: Vec<f64> = (0..2000).map(|i| 1e-6 * (0.5e6f64).powf(i as f64 / 1999.0)).collect();
    ts.extend((1..2000).map(|i| 0.5 + 0.5 * i as f64 / 2000.0));
    let (mut margin, mut worst_t) = (f64::NEG_INFINITY, ts[0]);
    for &t in &ts {
        let v = h(t);
        if v > margin {
            margin = v;
            worst_t = t;
        }
    }
    // t → 0: h(t) = (β²α₂² - ½) t² + O(t³)
    let a2 = b2 * nu2.as_ref().map_or(0.0, |n| n.coeff(2)) - 0.5;
    let holds = margin <= 0.0 && a2 <= 0.0;
    if a2 > 0.0 && margin <= 0.0 {
        worst_t = ts[0];
        margin = a2 * ts[0] * ts[0];
    }
    Ok(RsCondition { holds, worst_t, margin })
}
