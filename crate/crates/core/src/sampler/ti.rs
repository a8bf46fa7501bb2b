//! Thermodynamic integration: `F(β) = F(0) + ∫₀^β ⟨−H/N⟩_{β'} dβ'`.
//!
//! All grid nodes run as one replica-exchange ensemble, so the node at `β'=0`
//! (independent uniform draws) feeds the colder nodes. Error bars combine
//! batch means of the whole trapezoid sum, which keeps the correlation
//! between nodes, with the gap between the full and the half grid.

use serde::{Deserialize, Serialize};

use super::kernel::{run_ensemble, Domain, EnsembleConfig, EnsembleOutput};
use super::{SampleMeta, SampleSet, SamplerOptions};
use crate::error::{GlassError, Result};
use crate::exec::{mean, pairwise_sum, variance};
use crate::geometry::{band_log_volume, BandSpec, Configuration};
use crate::hamiltonian::Disorder;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ti,
    BandTi,
    ConditionalCount,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ti => "ti",
            Method::BandTi => "band-ti",
            Method::ConditionalCount => "conditional-count",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// Some node had split R̂ above the threshold.
    pub nonconverged: bool,
    /// No satisfying subset was seen; `value` is an upper bound.
    pub censored: bool,
    pub max_rhat: Option<f64>,
}

impl EstimateFlags {
    pub fn merge(&self, other: &EstimateFlags) -> EstimateFlags {
        let max_rhat = match (self.max_rhat, other.max_rhat) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        EstimateFlags {
            nonconverged: self.nonconverged || other.nonconverged,
            censored: self.censored || other.censored,
            max_rhat,
        }
    }

    /// `;`-separated names of the raised flags.
    pub fn describe(&self) -> String {
        let mut v = Vec::new();
        if self.nonconverged {
            v.push("nonconverged");
        }
        if self.censored {
            v.push("censored");
        }
        v.join(";")
    }
}

/// A per-site free energy, `(1/N) log` scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
    pub grid: Vec<f64>,
    pub flags: EstimateFlags,
}

impl FreeEnergyEstimate {
    pub fn exact(value: f64, method: Method) -> Self {
        FreeEnergyEstimate { value, std_error: 0.0, method, grid: vec![0.0], flags: EstimateFlags::default() }
    }

    pub fn is_flagged(&self) -> bool {
        self.flags.nonconverged || self.flags.censored
    }
}

/// Split-chain potential scale reduction of one scalar across chains.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    let pieces: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[half..2 * half]]).collect();
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let w = mean(&pieces.iter().map(|p| variance(p)).collect::<Vec<_>>());
    let b = half as f64 * variance(&means);
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let n = half as f64;
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    let parts: Vec<f64> =
        grid.windows(2).zip(values.windows(2)).map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1])).collect();
    pairwise_sum(&parts)
}

// every other node, always keeping both ends
fn half_grid_indices(len: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(2).collect();
    if *idx.last().expect("non-empty grid") != len - 1 {
        idx.push(len - 1);
    }
    idx
}

pub(super) struct Integrated {
    pub value: f64,
    pub mc_error: f64,
    pub grid_error: f64,
    pub max_rhat: f64,
    pub runs: Vec<EnsembleOutput>,
}

fn uniform_grid(beta: f64, size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(GlassError::invalid("grid_size", "need at least 2 nodes"));
    }
    Ok((0..size).map(|i| beta * i as f64 / (size - 1) as f64).collect())
}

/// Runs the grid ensemble and integrates `⟨−H/N⟩`. When `exact_origin` is
/// given it replaces the Monte Carlo mean at `β'=0`.
pub(super) fn integrate(
    d: &Disorder,
    domain: &Domain<'_>,
    grid: &[f64],
    exact_origin: Option<f64>,
    keep_top: bool,
    opts: &SamplerOptions,
) -> Result<Integrated> {
    opts.validate()?;
    d.materialize();
    let n = d.dim() as f64;
    let top = grid.len() - 1;
    let cfg = EnsembleConfig {
        burn_in: opts.burn_in,
        samples: opts.samples,
        thin: opts.thin,
        eta: opts.eta,
        swaps: true,
        keep: keep_top.then_some(top),
    };
    let runs = opts
        .execution
        .map_range(opts.chains, |c| {
            run_ensemble(d, domain, grid, &cfg, rng::stream(opts.seed, Purpose::Chain, c as u64))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let node_value = |i: usize, series: &[f64]| match (i, exact_origin) {
        (0, Some(v)) => v,
        _ => -mean(series) / n,
    };
    let pooled: Vec<Vec<f64>> =
        (0..grid.len()).map(|i| runs.iter().flat_map(|r| r.energies[i].iter().copied()).collect()).collect();
    let values: Vec<f64> = pooled.iter().enumerate().map(|(i, s)| node_value(i, s)).collect();
    let value = trapezoid(grid, &values);
    let half = half_grid_indices(grid.len());
    let half_value = trapezoid(
        &half.iter().map(|&i| grid[i]).collect::<Vec<_>>(),
        &half.iter().map(|&i| values[i]).collect::<Vec<_>>(),
    );

    let size = opts.samples / opts.batches;
    let mut batch_integrals = Vec::with_capacity(opts.chains * opts.batches);
    for r in &runs {
        for b in 0..opts.batches {
            let vals: Vec<f64> =
                (0..grid.len()).map(|i| node_value(i, &r.energies[i][b * size..(b + 1) * size])).collect();
            batch_integrals.push(trapezoid(grid, &vals));
        }
    }
    let mc_error = (variance(&batch_integrals) / batch_integrals.len() as f64).sqrt();

    let mut max_rhat: f64 = 1.0;
    for i in 0..grid.len() {
        if i == 0 && exact_origin.is_some() {
            continue;
        }
        let series: Vec<&[f64]> = runs.iter().map(|r| r.energies[i].as_slice()).collect();
        let rh = split_rhat(&series);
        if rh.is_nan() {
            continue;
        }
        max_rhat = max_rhat.max(rh);
    }
    Ok(Integrated { value, mc_error, grid_error: (value - half_value).abs(), max_rhat, runs })
}

fn estimate(value: f64, int: &Integrated, method: Method, grid: Vec<f64>, opts: &SamplerOptions) -> FreeEnergyEstimate {
    FreeEnergyEstimate {
        value,
        std_error: int.mc_error.hypot(int.grid_error),
        method,
        grid,
        flags: EstimateFlags {
            nonconverged: int.max_rhat > opts.rhat_max,
            censored: false,
            max_rhat: Some(int.max_rhat),
        },
    }
}

/// `F_{N,β} = (1/N) log Z_{N,β}` on the outer sphere.
pub fn free_energy_ti(d: &Disorder, beta: f64, grid_size: usize, opts: &SamplerOptions) -> Result<FreeEnergyEstimate> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(GlassError::invalid("beta", format!("must be finite and >= 0, got {beta}")));
    }
    if beta == 0.0 {
        return Ok(FreeEnergyEstimate::exact(0.0, Method::Ti));
    }
    let grid = uniform_grid(beta, grid_size)?;
    let domain = Domain::new(d.dim(), 1.0, None)?;
    let origin = -d.uniform_mean_energy() / d.dim() as f64;
    let int = integrate(d, &domain, &grid, Some(origin), false, opts)?;
    Ok(estimate(int.value, &int, Method::Ti, grid, opts))
}

/// A band free energy together with the equilibrium samples drawn at `β`.
#[derive(Debug, Clone)]
pub struct BandFreeEnergy {
    pub estimate: FreeEnergyEstimate,
    pub samples: SampleSet,
}

/// `F_{N,β}(σ₀) = (1/N) log ∫_{Band} e^{-βH} dσ`, anchored at the exact
/// normalized band volume.
pub fn band_free_energy(
    d: &Disorder,
    beta: f64,
    band: &BandSpec,
    grid_size: usize,
    opts: &SamplerOptions,
) -> Result<FreeEnergyEstimate> {
    band_free_energy_sampled(d, beta, band, grid_size, opts).map(|b| b.estimate)
}

pub fn band_free_energy_sampled(
    d: &Disorder,
    beta: f64,
    band: &BandSpec,
    grid_size: usize,
    opts: &SamplerOptions,
) -> Result<BandFreeEnergy> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(GlassError::invalid("beta", format!("must be finite and >= 0, got {beta}")));
    }
    let volume = band_log_volume(band.q(), band.width(), band.dim())?;
    let domain = Domain::new(d.dim(), 1.0, Some(band))?;
    if beta == 0.0 {
        let samples = super::mcmc_chain(d, 0.0, 1.0, Some(band), opts)?;
        return Ok(BandFreeEnergy { estimate: FreeEnergyEstimate::exact(volume, Method::BandTi), samples });
    }
    let grid = uniform_grid(beta, grid_size)?;
    let int = integrate(d, &domain, &grid, None, true, opts)?;
    let top = grid.len() - 1;
    let mut points = Vec::new();
    let mut energies = Vec::new();
    let mut chain_ids = Vec::new();
    for (c, r) in int.runs.iter().enumerate() {
        for p in &r.points {
            points.push(Configuration::on_sphere(p.clone(), 1.0)?);
        }
        energies.extend_from_slice(&r.energies[top]);
        chain_ids.extend(std::iter::repeat_n(c, r.points.len()));
    }
    let samples = SampleSet {
        points,
        energies,
        meta: SampleMeta {
            beta,
            radius_sq: 1.0,
            band: Some(band.clone()),
            chain_ids,
            thin: opts.thin,
            burn_in: opts.burn_in,
            seed: opts.seed,
            acceptance: int.runs.iter().map(|r| r.acceptance[top]).collect(),
            eta: int.runs.iter().map(|r| r.eta[top]).collect(),
        },
    };
    let estimate = estimate(volume + int.value, &int, Method::BandTi, grid, opts);
    Ok(BandFreeEnergy { estimate, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::Mixture;

    fn opts(seed: u64) -> SamplerOptions {
        SamplerOptions { burn_in: 500, samples: 400, thin: 2, seed, ..Default::default() }
    }

    #[test]
    fn zero_beta_is_exact() {
        let d = Disorder::sample(&Mixture::pure(2), 16, 0).unwrap();
        let f = free_energy_ti(&d, 0.0, 8, &opts(0)).unwrap();
        assert_eq!((f.value, f.std_error, f.grid.clone()), (0.0, 0.0, vec![0.0]));
        let band = BandSpec::new(Configuration::canonical(16, 0.4).unwrap(), 0.2).unwrap();
        let fb = band_free_energy(&d, 0.0, &band, 8, &opts(0)).unwrap();
        assert_eq!(fb.value, band_log_volume(0.4, 0.2, 16).unwrap());
    }

    #[test]
    fn annealed_bound() {
        let m = Mixture::new([(2, 0.3), (3, 0.7)]).unwrap();
        for seed in 0..3 {
            let d = Disorder::sample(&m, 24, seed).unwrap();
            let beta = 1.5;
            let f = free_energy_ti(&d, beta, 8, &opts(seed)).unwrap();
            assert!(f.std_error > 0.0);
            assert!(f.value <= 0.5 * beta * beta * m.value(1.0) + 3.0 * f.std_error, "{f:?}");
        }
    }

    #[test]
    fn vacuous_band_matches_sphere() {
        let d = Disorder::sample(&Mixture::pure(3), 24, 3).unwrap();
        let band = BandSpec::new(Configuration::canonical(24, 0.25).unwrap(), 1.0).unwrap();
        let a = free_energy_ti(&d, 1.0, 8, &opts(1)).unwrap();
        let b = band_free_energy(&d, 1.0, &band, 8, &opts(2)).unwrap();
        // δ=1 leaves out the cap t < √q − 1, which is tiny here
        assert!(band_log_volume(0.25, 1.0, 24).unwrap() > -1e-3);
        let se = a.std_error.hypot(b.std_error);
        assert!((a.value - b.value).abs() < 4.0 * se, "{} vs {} ± {se}", a.value, b.value);
    }

    #[test]
    fn band_free_energy_below_full() {
        let d = Disorder::sample(&Mixture::pure(3), 24, 5).unwrap();
        let mut rng = rng::stream(5, Purpose::Uniform, 0);
        let center = Configuration::uniform(24, 0.5, &mut rng).unwrap();
        let band = BandSpec::new(center, 0.2).unwrap();
        let full = free_energy_ti(&d, 1.0, 8, &opts(1)).unwrap();
        let b = band_free_energy_sampled(&d, 1.0, &band, 8, &opts(2)).unwrap();
        assert!(b.estimate.value <= full.value + 3.0 * full.std_error.hypot(b.estimate.std_error));
        assert_eq!(b.samples.points.len(), 4 * 400);
        assert!(b.samples.points.iter().all(|p| band.contains_raw(p.coords())));
    }

    #[test]
    fn rhat_detects_disagreement() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..100).map(|i| (i as f64 * 1.3).cos()).collect();
        assert!(split_rhat(&[&a, &b]) < 1.1);
        let c: Vec<f64> = b.iter().map(|x| x + 5.0).collect();
        assert!(split_rhat(&[&a, &c]) > 1.1);
    }

    #[test]
    fn half_grid() {
        assert_eq!(half_grid_indices(5), vec![0, 2, 4]);
        assert_eq!(half_grid_indices(4), vec![0, 2, 3]);
        assert_eq!(half_grid_indices(2), vec![0, 1]);
    }
}
