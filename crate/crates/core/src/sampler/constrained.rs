//! Constrained m-replica free energies.
//!
//! The probability that `m` independent Gibbs replicas in a band have all
//! pairwise overlaps within `ρ` of `q` is estimated by counting such
//! m-subsets among i.i.d. equilibrium draws: exhaustively when there are few
//! enough subsets, otherwise over uniformly drawn subsets. The fraction is a
//! U-statistic, unbiased for the probability.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::ti::{band_free_energy_sampled, split_rhat, EstimateFlags, FreeEnergyEstimate, Method};
use super::{mcmc_chain, SampleSet, SamplerOptions};
use crate::error::{GlassError, Result};
use crate::geometry::{dot, BandSpec, Configuration};
use crate::hamiltonian::Disorder;
use crate::mixture::binomial;
use crate::rng::{self, Purpose};

// satisfying subsets retained for reweighting
const KEEP_SUBSETS: usize = 200_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetProbability {
    pub satisfied: u64,
    pub examined: u64,
    pub exhaustive: bool,
    /// Disjoint m-subsets available: `⌊K/m⌋`.
    pub n_eff: usize,
    #[serde(skip)]
    pub subsets: Vec<Vec<usize>>,
}

impl SubsetProbability {
    pub fn p_hat(&self) -> f64 {
        if self.examined == 0 {
            return 0.0;
        }
        self.satisfied as f64 / self.examined as f64
    }

    /// `(1/(mN)) log p̂` with a binomial error bar mapped to log scale; an
    /// upper bound `log(3/n_eff)` flagged as censored when nothing was found.
    pub fn to_estimate(&self, m: usize, dim: usize, grid: Vec<f64>) -> FreeEnergyEstimate {
        let scale = (m * dim) as f64;
        let p = self.p_hat();
        let n = self.n_eff.max(1) as f64;
        if self.satisfied == 0 {
            return FreeEnergyEstimate {
                value: (3.0 / n).min(1.0).ln() / scale,
                std_error: 0.0,
                method: Method::ConditionalCount,
                grid,
                flags: EstimateFlags { censored: true, ..Default::default() },
            };
        }
        let resample = if self.exhaustive { 0.0 } else { 1.0 / self.examined as f64 };
        let se_p = (p * (1.0 - p) * (1.0 / n + resample)).sqrt();
        FreeEnergyEstimate {
            value: p.ln() / scale,
            std_error: se_p / p / scale,
            method: Method::ConditionalCount,
            grid,
            flags: EstimateFlags::default(),
        }
    }
}

fn compatible(points: &[Configuration], rho: f64, q: f64) -> Vec<Vec<bool>> {
    let k = points.len();
    let mut ok = vec![vec![false; k]; k];
    for i in 0..k {
        let n = points[i].dim() as f64;
        for j in (i + 1)..k {
            let r = dot(points[i].coords(), points[j].coords()) / n;
            let v = (r - q).abs() < rho;
            ok[i][j] = v;
            ok[j][i] = v;
        }
    }
    ok
}

fn enumerate_cliques(ok: &[Vec<bool>], m: usize, out: &mut SubsetProbability) {
    fn rec(ok: &[Vec<bool>], m: usize, start: usize, cur: &mut Vec<usize>, out: &mut SubsetProbability) {
        if cur.len() == m {
            out.satisfied += 1;
            if out.subsets.len() < KEEP_SUBSETS {
                out.subsets.push(cur.clone());
            }
            return;
        }
        let need = m - cur.len();
        for i in start..=ok.len().saturating_sub(need) {
            if cur.iter().all(|&j| ok[i][j]) {
                cur.push(i);
                rec(ok, m, i + 1, cur, out);
                cur.pop();
            }
        }
    }
    rec(ok, m, 0, &mut Vec::with_capacity(m), out);
}

/// Fraction of m-subsets of `points` whose pairwise overlaps `R` all satisfy
/// `|R − q| < ρ`.
pub fn overlap_subset_probability(
    points: &[Configuration],
    m: usize,
    rho: f64,
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<SubsetProbability> {
    if m < 2 {
        return Err(GlassError::invalid("m", "need at least two replicas"));
    }
    let k = points.len();
    if k < m {
        return Err(GlassError::invalid("samples", format!("{k} draws cannot form {m}-subsets")));
    }
    let ok = compatible(points, rho, q);
    let total = binomial(k as u32, m as u32);
    let mut out = SubsetProbability { satisfied: 0, examined: 0, exhaustive: false, n_eff: k / m, subsets: Vec::new() };
    if total <= trials as f64 {
        out.exhaustive = true;
        out.examined = total.round() as u64;
        enumerate_cliques(&ok, m, &mut out);
        return Ok(out);
    }
    let mut rng = rng::stream(seed, Purpose::Subset, 0);
    for _ in 0..trials {
        let mut s = index::sample(&mut rng, k, m).into_vec();
        out.examined += 1;
        let good = (0..m).all(|a| (a + 1..m).all(|b| ok[s[a]][s[b]]));
        if good {
            out.satisfied += 1;
            if out.subsets.len() < KEEP_SUBSETS {
                s.sort_unstable();
                out.subsets.push(s);
            }
        }
    }
    Ok(out)
}

fn check_replica_args(m: usize, rho: f64) -> Result<()> {
    if m < 2 {
        return Err(GlassError::invalid("m", "need at least two replicas"));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(GlassError::invalid("rho", format!("must lie in (0,1], got {rho}")));
    }
    Ok(())
}

fn grid_for(beta: f64) -> Vec<f64> {
    if beta == 0.0 {
        vec![0.0]
    } else {
        vec![0.0, beta]
    }
}

fn rhat_flags(s: &SampleSet, chains: usize, rhat_max: f64) -> EstimateFlags {
    let per: Vec<Vec<f64>> = (0..chains)
        .map(|c| s.energies.iter().zip(&s.meta.chain_ids).filter(|(_, &id)| id == c).map(|(e, _)| *e).collect())
        .collect();
    let refs: Vec<&[f64]> = per.iter().map(|v| v.as_slice()).collect();
    let r = split_rhat(&refs);
    if r.is_nan() || s.meta.beta == 0.0 {
        return EstimateFlags::default();
    }
    EstimateFlags { nonconverged: r > rhat_max, censored: false, max_rhat: Some(r) }
}

/// `(1/(mN)) log G^{⊗m}{∀i≠j: |R(σᵢ,σⱼ) − q| < ρ}` under the Gibbs measure
/// restricted to `band` (or the whole sphere).
pub fn conditional_overlap_prob(
    d: &Disorder,
    beta: f64,
    band: Option<&BandSpec>,
    m: usize,
    rho: f64,
    q: f64,
    opts: &SamplerOptions,
) -> Result<FreeEnergyEstimate> {
    check_replica_args(m, rho)?;
    if rho >= 1.0 {
        return Ok(FreeEnergyEstimate {
            grid: grid_for(beta),
            ..FreeEnergyEstimate::exact(0.0, Method::ConditionalCount)
        });
    }
    let s = mcmc_chain(d, beta, 1.0, band, opts)?;
    let count = overlap_subset_probability(&s.points, m, rho, q, opts.subset_trials, opts.seed)?;
    let mut est = count.to_estimate(m, d.dim(), grid_for(beta));
    est.flags = est.flags.merge(&rhat_flags(&s, opts.chains, opts.rhat_max));
    Ok(est)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstrainedEstimate {
    /// `F_{N,β}(σ₀)`.
    pub band: FreeEnergyEstimate,
    /// The conditional log-probability per `mN`.
    pub conditional: FreeEnergyEstimate,
    /// `F_{N,β}(σ₀, m, ρ) = band + conditional`.
    pub constrained: FreeEnergyEstimate,
    /// `F^c = constrained + βH(σ₀)/N`.
    pub centered: FreeEnergyEstimate,
    pub center_energy_per_site: f64,
}

fn combine(a: &FreeEnergyEstimate, b: &FreeEnergyEstimate, shift: f64) -> FreeEnergyEstimate {
    FreeEnergyEstimate {
        value: a.value + b.value + shift,
        std_error: a.std_error.hypot(b.std_error),
        method: a.method,
        grid: a.grid.clone(),
        flags: a.flags.merge(&b.flags),
    }
}

struct Constrained {
    est: ConstrainedEstimate,
    samples: SampleSet,
    count: SubsetProbability,
}

#[allow(clippy::too_many_arguments)]
fn constrained_run(
    d: &Disorder,
    beta: f64,
    band: &BandSpec,
    m: usize,
    rho: f64,
    q: f64,
    grid_size: usize,
    opts: &SamplerOptions,
) -> Result<Constrained> {
    check_replica_args(m, rho)?;
    let b = band_free_energy_sampled(d, beta, band, grid_size, opts)?;
    let count = overlap_subset_probability(&b.samples.points, m, rho, q, opts.subset_trials, opts.seed)?;
    let conditional = if rho >= 1.0 {
        FreeEnergyEstimate { grid: grid_for(beta), ..FreeEnergyEstimate::exact(0.0, Method::ConditionalCount) }
    } else {
        count.to_estimate(m, d.dim(), grid_for(beta))
    };
    let h0 = d.energy(band.center())? / d.dim() as f64;
    let constrained = combine(&b.estimate, &conditional, 0.0);
    let centered = combine(&b.estimate, &conditional, beta * h0);
    Ok(Constrained {
        est: ConstrainedEstimate { band: b.estimate, conditional, constrained, centered, center_energy_per_site: h0 },
        samples: b.samples,
        count,
    })
}

/// Band, conditional, constrained and centered constrained free energies
/// from one band run at `β`.
#[allow(clippy::too_many_arguments)]
pub fn centered_constrained_fe(
    d: &Disorder,
    beta: f64,
    band: &BandSpec,
    m: usize,
    rho: f64,
    q: f64,
    grid_size: usize,
    opts: &SamplerOptions,
) -> Result<ConstrainedEstimate> {
    constrained_run(d, beta, band, m, rho, q, grid_size, opts).map(|c| c.est)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub m: usize,
    pub epsilon: f64,
    /// `|F^c(J+εδJ) − F^c(J)| / (ε‖δJ‖)` for unit `δJ`.
    pub ratio: f64,
    /// `β√(ν(1)(1/m+ρ)/N) + 10⁻³`.
    pub bound: f64,
    pub subsets_used: usize,
    pub passed: bool,
}

// σ^{⊗p} flattened row-major
fn outer_power(x: &[f64], p: u32) -> Vec<f64> {
    let mut t = vec![1.0];
    for _ in 0..p {
        t = t.iter().flat_map(|a| x.iter().map(move |b| a * b)).collect();
    }
    t
}

/// Perturbs the disorder along the estimated gradient of `F^c` and measures
/// the change of the centered constrained free energy by reweighting the
/// same samples.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_check(
    d: &Disorder,
    beta: f64,
    band: &BandSpec,
    m: usize,
    rho: f64,
    q: f64,
    epsilon: f64,
    opts: &SamplerOptions,
) -> Result<LipschitzReport> {
    let run = constrained_run(d, beta, band, m, rho, q, 2, opts)?;
    let subsets = &run.count.subsets;
    if subsets.is_empty() {
        return Err(GlassError::Numerical("no satisfying subsets to reweight".into()));
    }
    let n = d.dim();
    let mix = d.mixture();
    let mut mult = vec![0.0; run.samples.points.len()];
    for s in subsets {
        for &i in s {
            mult[i] += 1.0;
        }
    }
    let w = 1.0 / subsets.len() as f64;
    // ∇F^c in the raw couplings, degree by degree
    let mut tensors = Vec::new();
    for (p, g2) in mix.terms() {
        let scale = g2.sqrt() * (n as f64).powf(-(p as f64 - 1.0) / 2.0);
        let mut g = outer_power(band.center().coords(), p);
        g.iter_mut().for_each(|v| *v *= m as f64);
        for (i, c) in mult.iter().enumerate().filter(|(_, c)| **c > 0.0) {
            let t = outer_power(run.samples.points[i].coords(), p);
            g.iter_mut().zip(&t).for_each(|(a, b)| *a -= w * c * b);
        }
        let f = beta * scale / (m * n) as f64;
        g.iter_mut().for_each(|v| *v *= f);
        tensors.push((p, g));
    }
    let norm = tensors.iter().map(|(_, t)| dot(t, t)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(GlassError::Numerical("vanishing gradient direction".into()));
    }
    tensors.iter_mut().for_each(|(_, t)| t.iter_mut().for_each(|v| *v /= norm));
    let delta = Disorder::from_tensors(mix, n, tensors)?;
    // H_{J+εδJ} − H_J = ε·H_{δJ}
    let dh: Vec<f64> = run.samples.points.iter().map(|p| epsilon * delta.energy_raw(p.coords())).collect();
    let log_w: Vec<f64> = subsets.iter().map(|s| -beta * s.iter().map(|&i| dh[i]).sum::<f64>()).collect();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + (log_w.iter().map(|v| (v - top).exp()).sum::<f64>() * w).ln();
    let shift = beta * epsilon * delta.energy_raw(band.center().coords()) / n as f64;
    let change = lse / (m * n) as f64 + shift;
    let ratio = change.abs() / epsilon;
    let bound = beta * (mix.value(1.0) * (1.0 / m as f64 + rho) / n as f64).sqrt() + 1e-3;
    Ok(LipschitzReport { m, epsilon, ratio, bound, subsets_used: subsets.len(), passed: ratio <= bound })
}
