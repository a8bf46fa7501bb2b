//! Gibbs sampling on spheres and bands, and free-energy estimators built on it.
//!
//! The dynamics is our own choice: Metropolis with tangent Gaussian proposals
//! and optional replica exchange (see [`kernel`]). Independent chains run as
//! separate work items, each with its own generator stream `(seed, chain id)`.

mod constrained;
mod io;
pub mod kernel;
mod ti;

use serde::{Deserialize, Serialize};

use crate::error::{GlassError, Result};
use crate::exec::Execution;
use crate::geometry::{BandSpec, Configuration};
use crate::hamiltonian::Disorder;
use crate::rng::{self, Purpose};

pub use constrained::{
    centered_constrained_fe, conditional_overlap_prob, lipschitz_check, overlap_subset_probability,
    ConstrainedEstimate, LipschitzReport, SubsetProbability,
};
pub use io::{read_dump, write_dump, write_estimates_csv, EstimateRow, RunManifest};
pub use kernel::{Chain, Domain, StepOutcome};
pub use ti::{band_free_energy, free_energy_ti, split_rhat, BandFreeEnergy, EstimateFlags, FreeEnergyEstimate, Method};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions {
    /// Independent chains (or replica-exchange ensembles).
    pub chains: usize,
    /// Sweeps discarded per chain; step sizes are tuned only here.
    pub burn_in: usize,
    /// Records kept per chain.
    pub samples: usize,
    /// Sweeps between records.
    pub thin: usize,
    /// Initial tangent step, in raw coordinates.
    pub eta: f64,
    /// Levels of the geometric tempering ladder of `mcmc_chain`; 1 disables it.
    pub tempering_levels: usize,
    pub ladder_ratio: f64,
    /// Batches per chain for batch-means error bars.
    pub batches: usize,
    /// Random m-subsets examined when exhaustive counting is too expensive.
    pub subset_trials: usize,
    /// Threshold on split R̂ above which an estimate is flagged.
    pub rhat_max: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            chains: 4,
            burn_in: 1000,
            samples: 1000,
            thin: 4,
            eta: 0.2,
            tempering_levels: 1,
            ladder_ratio: 1.25,
            batches: 20,
            subset_trials: 1_000_000,
            rhat_max: 1.1,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl SamplerOptions {
    fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(GlassError::invalid("sampler.chains", "need at least one chain"));
        }
        if self.samples == 0 {
            return Err(GlassError::invalid("sampler.samples", "need at least one record"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(GlassError::invalid("sampler.eta", format!("must be positive, got {}", self.eta)));
        }
        if self.tempering_levels == 0 {
            return Err(GlassError::invalid("sampler.tempering_levels", "must be at least 1"));
        }
        if !(self.ladder_ratio > 1.0) {
            return Err(GlassError::invalid("sampler.ladder_ratio", "must exceed 1"));
        }
        if self.batches == 0 || self.batches > self.samples {
            return Err(GlassError::invalid("sampler.batches", "must lie in 1..=samples"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMeta {
    pub beta: f64,
    pub radius_sq: f64,
    pub band: Option<BandSpec>,
    /// Chain of origin of each point.
    pub chain_ids: Vec<usize>,
    pub thin: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Post-burn-in acceptance rate of the target-temperature replica, per chain.
    pub acceptance: Vec<f64>,
    /// Frozen step size per chain.
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSet {
    pub points: Vec<Configuration>,
    /// `H(σ)` of each point.
    pub energies: Vec<f64>,
    pub meta: SampleMeta,
}

impl SampleSet {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    /// Points of one chain, in record order.
    pub fn chain(&self, id: usize) -> impl Iterator<Item = &Configuration> {
        self.points.iter().zip(&self.meta.chain_ids).filter(move |(_, &c)| c == id).map(|(p, _)| p)
    }
}

// ascending ladder ending at beta
fn ladder(beta: f64, levels: usize, ratio: f64) -> Vec<f64> {
    if beta == 0.0 {
        return vec![0.0];
    }
    (0..levels).rev().map(|k| beta / ratio.powi(k as i32)).collect()
}

/// Equilibrium samples of `e^{-βH}` on `S^{N-1}(radius_sq)`, optionally
/// restricted to a band of the outer sphere.
pub fn mcmc_chain(
    d: &Disorder,
    beta: f64,
    radius_sq: f64,
    band: Option<&BandSpec>,
    opts: &SamplerOptions,
) -> Result<SampleSet> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(GlassError::invalid("beta", format!("must be finite and >= 0, got {beta}")));
    }
    opts.validate()?;
    d.materialize();
    let domain = Domain::new(d.dim(), radius_sq, band)?;
    let betas = ladder(beta, opts.tempering_levels, opts.ladder_ratio);
    let top = betas.len() - 1;
    let cfg = kernel::EnsembleConfig {
        burn_in: opts.burn_in,
        samples: opts.samples,
        thin: opts.thin,
        eta: opts.eta,
        swaps: betas.len() > 1,
        keep: Some(top),
    };
    let runs = opts.execution.map_range(opts.chains, |c| {
        kernel::run_ensemble(d, &domain, &betas, &cfg, rng::stream(opts.seed, Purpose::Chain, c as u64))
    });
    let mut points = Vec::with_capacity(opts.chains * opts.samples);
    let mut energies = Vec::with_capacity(points.capacity());
    let mut chain_ids = Vec::with_capacity(points.capacity());
    let mut acceptance = Vec::new();
    let mut eta = Vec::new();
    for (c, run) in runs.into_iter().enumerate() {
        let run = run?;
        acceptance.push(run.acceptance[top]);
        eta.push(run.eta[top]);
        energies.extend_from_slice(&run.energies[top]);
        chain_ids.extend(std::iter::repeat_n(c, run.points.len()));
        for p in run.points {
            points.push(Configuration::on_sphere(p, radius_sq)?);
        }
    }
    Ok(SampleSet {
        points,
        energies,
        meta: SampleMeta {
            beta,
            radius_sq,
            band: band.cloned(),
            chain_ids,
            thin: opts.thin,
            burn_in: opts.burn_in,
            seed: opts.seed,
            acceptance,
            eta,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dot, in_band};
    use crate::mixture::Mixture;

    fn quick() -> SamplerOptions {
        SamplerOptions { burn_in: 400, samples: 200, thin: 2, ..Default::default() }
    }

    #[test]
    fn infinite_temperature_overlaps_vanish() {
        let n = 64;
        let d = Disorder::sample(&Mixture::pure(3), n, 4).unwrap();
        let s = mcmc_chain(&d, 0.0, 1.0, None, &quick()).unwrap();
        let a: Vec<_> = s.chain(0).collect();
        let b: Vec<_> = s.chain(1).collect();
        let r: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.dot(y) / n as f64).collect();
        let m = crate::exec::mean(&r);
        assert!(m.abs() < 5.0 / (n as f64).sqrt(), "{m}");
        assert!(s.points.iter().all(|p| p.is_on_sphere(1.0, 1e-8)));
    }

    #[test]
    fn infinite_temperature_band_samples_are_in_band() {
        let d = Disorder::sample(&Mixture::pure(2), 32, 1).unwrap();
        let band = BandSpec::new(Configuration::canonical(32, 0.3).unwrap(), 0.05).unwrap();
        let s = mcmc_chain(&d, 0.0, 1.0, Some(&band), &quick()).unwrap();
        assert!(s.points.iter().all(|p| in_band(p, &band).unwrap()));
    }

    #[test]
    fn inner_sphere_and_tempering() {
        let d = Disorder::sample(&Mixture::pure(3), 20, 1).unwrap();
        let opts = SamplerOptions { tempering_levels: 4, ..quick() };
        let s = mcmc_chain(&d, 2.0, 0.5, None, &opts).unwrap();
        assert_eq!(s.points.len(), 4 * 200);
        for (p, e) in s.points.iter().zip(&s.energies) {
            assert!(p.is_on_sphere(0.5, 1e-8));
            assert!((d.energy(p).unwrap() - e).abs() < 1e-9 * (1.0 + e.abs()));
        }
        assert!(s.meta.acceptance.iter().all(|a| (0.1..0.9).contains(a)), "{:?}", s.meta.acceptance);
    }

    #[test]
    fn results_do_not_depend_on_execution() {
        let d = Disorder::sample(&Mixture::pure(2), 16, 1).unwrap();
        let mut o = quick();
        o.samples = 20;
        let a = mcmc_chain(&d, 1.0, 1.0, None, &o).unwrap();
        o.execution = Execution::Sequential;
        let b = mcmc_chain(&d, 1.0, 1.0, None, &o).unwrap();
        assert_eq!(a.energies, b.energies);
        assert!(dot(a.points[5].coords(), b.points[5].coords()) > 15.999);
    }

    #[test]
    fn band_needs_outer_sphere() {
        let d = Disorder::sample(&Mixture::pure(2), 16, 1).unwrap();
        let band = BandSpec::new(Configuration::canonical(16, 0.3).unwrap(), 0.05).unwrap();
        assert!(mcmc_chain(&d, 1.0, 0.5, Some(&band), &quick()).is_err());
    }
}
