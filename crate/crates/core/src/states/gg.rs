//! Ghirlanda-Guerra defects from overlap arrays of several disorder draws.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::OverlapMatrix;
use crate::error::{GlassError, Result};
use crate::exec::variance;
use crate::rng::{stream, Purpose};

/// `ψ` applied to a single overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Psi {
    Constant(f64),
    Power(u32),
}

impl Psi {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Psi::Constant(c) => c,
            Psi::Power(k) => r.powi(k as i32),
        }
    }
}

/// `f` applied to the array of the first `n` replicas (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFn {
    One,
    Power { a: usize, b: usize, exponent: u32 },
}

impl TestFn {
    fn check(self, n: usize) -> Result<()> {
        match self {
            TestFn::Power { a, b, .. } if a >= n || b >= n => {
                Err(GlassError::invalid("f", format!("indices ({a},{b}) outside the first {n} replicas")))
            }
            _ => Ok(()),
        }
    }

    fn eval(self, m: &OverlapMatrix, base: usize) -> f64 {
        match self {
            TestFn::One => 1.0,
            TestFn::Power { a, b, exponent } => m.get(base + a, base + b).powi(exponent as i32),
        }
    }
}

/// Sign in front of `Σ_{k=2}^n E⟨f ψ(R_{1,k})⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GgSign {
    /// Minus: the identity `n E⟨fψ(R_{1,n+1})⟩ = E⟨f⟩E⟨ψ⟩ + Σ E⟨fψ(R_{1,k})⟩`.
    #[default]
    Standard,
    /// Plus.
    AsDisplayed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GgOptions {
    pub sign: GgSign,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for GgOptions {
    fn default() -> Self {
        GgOptions { sign: GgSign::Standard, bootstrap: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GgDefect {
    pub value: f64,
    /// Bootstrap over draws; 0 with a single draw.
    pub std_error: f64,
    pub draws: usize,
    /// Disjoint blocks of `n+1` replicas used per draw (smallest over draws).
    pub blocks: usize,
}

// per-draw Gibbs averages ⟨fψ(R_{1,n+1})⟩, ⟨f⟩, ⟨ψ(R_12)⟩, Σ_k ⟨fψ(R_1k)⟩
fn draw_terms(m: &OverlapMatrix, n: usize, psi: Psi, f: TestFn) -> [f64; 4] {
    let blocks = m.len() / (n + 1);
    let mut t = [0.0; 4];
    for blk in 0..blocks {
        let b = blk * (n + 1);
        let fv = f.eval(m, b);
        let c = psi.eval(m.get(b, b + 1));
        t[0] += fv * psi.eval(m.get(b, b + n));
        t[1] += fv;
        t[2] += c;
        t[3] += (1..n).map(|k| fv * psi.eval(m.get(b, b + k))).sum::<f64>();
    }
    t.map(|x| x / blocks as f64)
}

fn combine(terms: &[[f64; 4]], idx: impl Iterator<Item = usize> + Clone, n: usize, sign: GgSign) -> f64 {
    let count = idx.clone().count() as f64;
    let mut mean = [0.0; 4];
    for i in idx {
        for (m, t) in mean.iter_mut().zip(terms[i]) {
            *m += t;
        }
    }
    let [a, b, c, s] = mean.map(|x| x / count);
    let s = match sign {
        GgSign::Standard => -s,
        GgSign::AsDisplayed => s,
    };
    (n as f64 * a - b * c + s).abs()
}

/// `|n E⟨fψ(R_{1,n+1})⟩ − E⟨f⟩E⟨ψ(R_{1,2})⟩ ∓ Σ_{k=2}^n E⟨fψ(R_{1,k})⟩|`.
///
/// Each array holds replicas of one disorder draw; `⟨·⟩` averages over
/// disjoint consecutive blocks of `n+1` replicas and `E` over draws.
pub fn gg_defect(sets: &[OverlapMatrix], n: usize, psi: Psi, f: TestFn, opts: &GgOptions) -> Result<GgDefect> {
    if n == 0 {
        return Err(GlassError::invalid("n", "must be at least 1"));
    }
    if sets.is_empty() {
        return Err(GlassError::invalid("sets", "no disorder draws"));
    }
    f.check(n)?;
    if let Some(m) = sets.iter().find(|m| m.len() < n + 1) {
        return Err(GlassError::invalid("sets", format!("{} replicas, need at least {}", m.len(), n + 1)));
    }
    let terms: Vec<[f64; 4]> = sets.iter().map(|m| draw_terms(m, n, psi, f)).collect();
    let d = terms.len();
    let value = combine(&terms, 0..d, n, opts.sign);
    let std_error = if d < 2 || opts.bootstrap < 2 {
        0.0
    } else {
        let mut rng = stream(opts.seed, Purpose::Bootstrap, 0);
        let reps: Vec<f64> = (0..opts.bootstrap)
            .map(|_| {
                let idx: Vec<usize> = (0..d).map(|_| rng.gen_range(0..d)).collect();
                combine(&terms, idx.into_iter(), n, opts.sign)
            })
            .collect();
        variance(&reps).sqrt()
    };
    let blocks = sets.iter().map(|m| m.len() / (n + 1)).min().unwrap_or(0);
    Ok(GgDefect { value, std_error, draws: d, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Configuration;
    use crate::states::{overlap_matrix, planted};

    fn uniform_sets(draws: usize, replicas: usize) -> Vec<OverlapMatrix> {
        (0..draws)
            .map(|d| {
                let mut rng = stream(d as u64, Purpose::Uniform, 0);
                let pts: Vec<Configuration> =
                    (0..replicas).map(|_| Configuration::uniform(32, 1.0, &mut rng).unwrap()).collect();
                overlap_matrix(&pts).unwrap()
            })
            .collect()
    }

    #[test]
    fn first_identity_with_unit_f_is_exact() {
        let sets = uniform_sets(5, 12);
        for psi in [Psi::Power(1), Psi::Power(2), Psi::Power(3)] {
            let d = gg_defect(&sets, 1, psi, TestFn::One, &GgOptions::default()).unwrap();
            assert_eq!(d.value, 0.0);
            assert_eq!(d.std_error, 0.0);
        }
    }

    #[test]
    fn constant_psi_cancels_with_standard_sign() {
        let sets = uniform_sets(4, 12);
        let f = TestFn::Power { a: 0, b: 1, exponent: 2 };
        for n in 2..5 {
            let d = gg_defect(&sets, n, Psi::Constant(0.7), f, &GgOptions::default()).unwrap();
            assert!(d.value < 1e-15, "{n}: {}", d.value);
        }
        let plus = GgOptions { sign: GgSign::AsDisplayed, ..Default::default() };
        let d = gg_defect(&sets, 3, Psi::Constant(0.7), TestFn::One, &plus).unwrap();
        assert!((d.value - 2.0 * 2.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn non_exchangeable_replicas_have_a_defect() {
        let r = 0.8;
        let sets: Vec<OverlapMatrix> =
            (0..20).map(|s| overlap_matrix(&planted::non_exchangeable(64, 3, r, s).unwrap()).unwrap()).collect();
        let f = TestFn::Power { a: 0, b: 1, exponent: 1 };
        let d = gg_defect(&sets, 2, Psi::Power(1), f, &GgOptions::default()).unwrap();
        // 2·E R12R13 − (E R12)² − E R12² ≈ −2r²
        assert!((d.value - 2.0 * r * r).abs() < 0.1, "{}", d.value);
        assert!(d.std_error < 0.05);
        let u = gg_defect(&uniform_sets(20, 30), 2, Psi::Power(1), f, &GgOptions::default()).unwrap();
        assert!(u.value < 0.05, "{}", u.value);
    }

    #[test]
    fn too_few_replicas() {
        let sets = uniform_sets(2, 3);
        assert!(gg_defect(&sets, 3, Psi::Power(1), TestFn::One, &GgOptions::default()).is_err());
        let f = TestFn::Power { a: 0, b: 2, exponent: 1 };
        assert!(gg_defect(&sets, 2, Psi::Power(1), f, &GgOptions::default()).is_err());
    }
}
