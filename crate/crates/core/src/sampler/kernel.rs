//! Metropolis kernel on spheres and bands, and the replica-exchange driver.
//!
//! A proposal adds `η·ξ` to `σ`, with `ξ` a standard Gaussian projected on
//! the tangent space at `σ`, and maps the result back to the sphere. The law
//! of the angle between `σ` and the proposal does not depend on the
//! direction of travel, so the proposal is symmetric with respect to the
//! uniform measure and plain Metropolis acceptance targets `e^{-βH}`.
//! Band constraints are enforced by rejection. At `β = 0` the kernel draws
//! independent uniform points instead.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{GlassError, Result};
use crate::geometry::{dot, BandSampler, BandSpec};
use crate::hamiltonian::Disorder;
use crate::rng::Rng;

// proposals in the band diagnostic window, and the tolerated rejection share
const BAND_WINDOW: usize = 1000;
const BAND_REJECT_MAX: f64 = 0.999;
const TUNE_WINDOW: usize = 100;
const TARGET_ACCEPT: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Rejected,
    OutOfBand,
}

/// Where a chain lives: a sphere `S^{N-1}(q)`, optionally cut to a band.
#[derive(Clone)]
pub struct Domain<'a> {
    radius: f64,
    band: Option<(&'a BandSpec, BandSampler)>,
}

impl<'a> Domain<'a> {
    pub fn new(dim: usize, radius_sq: f64, band: Option<&'a BandSpec>) -> Result<Self> {
        if !(radius_sq > 0.0 && radius_sq <= 1.0) {
            return Err(GlassError::invalid("radius_sq", format!("must lie in (0,1], got {radius_sq}")));
        }
        let band = match band {
            Some(b) => {
                if b.dim() != dim {
                    return Err(GlassError::DimensionMismatch { expected: dim, got: b.dim() });
                }
                if (radius_sq - 1.0).abs() > 1e-12 {
                    return Err(GlassError::invalid("radius_sq", "bands live on the outer sphere (radius_sq = 1)"));
                }
                Some((b, BandSampler::new(b)?))
            }
            None => None,
        };
        Ok(Domain { radius: (dim as f64 * radius_sq).sqrt(), band })
    }

    pub fn band(&self) -> Option<&BandSpec> {
        self.band.as_ref().map(|(b, _)| *b)
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.band.as_ref().is_none_or(|(b, _)| b.contains_raw(x))
    }

    /// An exact uniform draw from the domain.
    pub fn uniform(&self, dim: usize, rng: &mut Rng) -> Vec<f64> {
        match &self.band {
            Some((_, s)) => s.sample(rng),
            None => {
                let mut g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let s = self.radius / dot(&g, &g).sqrt();
                g.iter_mut().for_each(|v| *v *= s);
                g
            }
        }
    }
}

/// One Metropolis chain at fixed `β`.
pub struct Chain<'a> {
    d: &'a Disorder,
    domain: Domain<'a>,
    beta: f64,
    x: Vec<f64>,
    energy: f64,
    eta: f64,
    rng: Rng,
    proposals: u64,
    accepted: u64,
    out_of_band: u64,
    buf: Vec<f64>,
}

impl<'a> Chain<'a> {
    /// Starts from an exact uniform draw of the domain.
    pub fn new(d: &'a Disorder, domain: Domain<'a>, beta: f64, eta: f64, mut rng: Rng) -> Self {
        let x = domain.uniform(d.dim(), &mut rng);
        let energy = d.energy_raw(&x);
        Chain {
            d,
            domain,
            beta,
            energy,
            buf: vec![0.0; x.len()],
            x,
            eta,
            rng,
            proposals: 0,
            accepted: 0,
            out_of_band: 0,
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn acceptance(&self) -> f64 {
        if self.proposals == 0 {
            return f64::NAN;
        }
        self.accepted as f64 / self.proposals as f64
    }

    fn reset_counters(&mut self) {
        self.proposals = 0;
        self.accepted = 0;
        self.out_of_band = 0;
    }

    pub fn step(&mut self) -> StepOutcome {
        self.proposals += 1;
        let n = self.x.len();
        if self.beta == 0.0 {
            self.x = self.domain.uniform(n, &mut self.rng);
            self.energy = self.d.energy_raw(&self.x);
            self.accepted += 1;
            return StepOutcome::Accepted;
        }
        for v in self.buf.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
        let c = dot(&self.buf, &self.x) / (self.domain.radius * self.domain.radius);
        let eta = self.eta;
        for (b, x) in self.buf.iter_mut().zip(&self.x) {
            *b = x + eta * (*b - c * x);
        }
        let s = self.domain.radius / dot(&self.buf, &self.buf).sqrt();
        self.buf.iter_mut().for_each(|v| *v *= s);
        if !self.domain.contains(&self.buf) {
            self.out_of_band += 1;
            return StepOutcome::OutOfBand;
        }
        let e = self.d.energy_raw(&self.buf);
        let log_ratio = -self.beta * (e - self.energy);
        if log_ratio >= 0.0 || self.rng.gen::<f64>().ln() < log_ratio {
            std::mem::swap(&mut self.x, &mut self.buf);
            self.energy = e;
            self.accepted += 1;
            StepOutcome::Accepted
        } else {
            StepOutcome::Rejected
        }
    }

    // multiplicative step-size update from the last window's acceptance
    fn tune(&mut self) {
        let rate = self.accepted as f64 / self.proposals.max(1) as f64;
        self.eta *= (rate / TARGET_ACCEPT).clamp(0.5, 2.0);
        self.eta = self.eta.clamp(1e-8, 4.0);
        self.reset_counters();
    }

    fn swap_state(&mut self, other: &mut Chain<'a>) {
        std::mem::swap(&mut self.x, &mut other.x);
        std::mem::swap(&mut self.energy, &mut other.energy);
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    pub eta: f64,
    pub swaps: bool,
    /// Replica whose configurations are kept, if any.
    pub keep: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    /// `energies[r][s]`: energy of replica `r` at record `s`.
    pub energies: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    pub acceptance: Vec<f64>,
    pub swap_acceptance: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Replica exchange over `betas` (ascending), with even/odd swap sweeps after
/// every Metropolis sweep. Step sizes are tuned during burn-in and frozen.
pub fn run_ensemble(
    d: &Disorder,
    domain: &Domain<'_>,
    betas: &[f64],
    cfg: &EnsembleConfig,
    mut rng: Rng,
) -> Result<EnsembleOutput> {
    let mut chains: Vec<Chain<'_>> = betas
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let sub = crate::rng::stream(rng.gen(), crate::rng::Purpose::Chain, i as u64);
            Chain::new(d, domain.clone(), b, cfg.eta, sub)
        })
        .collect();
    let pairs = betas.len().saturating_sub(1);
    let mut swap_tries = vec![0u64; pairs];
    let mut swap_accepts = vec![0u64; pairs];
    let mut sweep = 0usize;

    let mut do_sweep = |chains: &mut Vec<Chain<'_>>, rng: &mut Rng, count: bool| {
        for c in chains.iter_mut() {
            c.step();
        }
        if cfg.swaps && pairs > 0 {
            let parity = sweep % 2;
            for i in (parity..pairs).step_by(2) {
                let (lo, hi) = chains.split_at_mut(i + 1);
                let (a, b) = (&mut lo[i], &mut hi[0]);
                let log_ratio = (b.beta - a.beta) * (b.energy - a.energy);
                let accept = log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio;
                if count {
                    swap_tries[i] += 1;
                }
                if accept {
                    a.swap_state(b);
                    if count {
                        swap_accepts[i] += 1;
                    }
                }
            }
        }
        sweep += 1;
    };

    // band diagnostic on the untuned step size
    if domain.band().is_some() {
        for _ in 0..BAND_WINDOW {
            do_sweep(&mut chains, &mut rng, false);
        }
        for c in &chains {
            let share = c.out_of_band as f64 / c.proposals.max(1) as f64;
            if c.beta > 0.0 && share > BAND_REJECT_MAX {
                let (lo, hi) = domain.band().expect("checked").interval();
                // a tangent step moves t by about η/√N
                let suggested_eta = 0.25 * (hi - lo) * (d.dim() as f64).sqrt();
                return Err(GlassError::Tuning { rate: share, suggested_eta });
            }
        }
        chains.iter_mut().for_each(|c| c.reset_counters());
    }
    for s in 0..cfg.burn_in {
        do_sweep(&mut chains, &mut rng, false);
        if (s + 1) % TUNE_WINDOW == 0 {
            chains.iter_mut().for_each(|c| c.tune());
        }
    }
    chains.iter_mut().for_each(|c| c.reset_counters());

    let thin = cfg.thin.max(1);
    let mut energies = vec![Vec::with_capacity(cfg.samples); betas.len()];
    let mut points = Vec::new();
    for _ in 0..cfg.samples {
        for _ in 0..thin {
            do_sweep(&mut chains, &mut rng, true);
        }
        for (r, c) in chains.iter().enumerate() {
            energies[r].push(c.energy);
        }
        if let Some(k) = cfg.keep {
            points.push(chains[k].x.clone());
        }
    }
    Ok(EnsembleOutput {
        energies,
        points,
        acceptance: chains.iter().map(|c| c.acceptance()).collect(),
        swap_acceptance: swap_tries
            .iter()
            .zip(&swap_accepts)
            .map(|(&t, &a)| if t == 0 { f64::NAN } else { a as f64 / t as f64 })
            .collect(),
        eta: chains.iter().map(|c| c.eta).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Configuration;
    use crate::mixture::Mixture;
    use crate::rng::{stream, Purpose};

    // cell of a point of S²: axis of the largest coordinate and its sign
    fn cell(x: &[f64]) -> usize {
        let (i, v) = x.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap();
        2 * i + (*v > 0.0) as usize
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn kernel_is_reversible() {
        let m = Mixture::new([(2, 0.5), (3, 0.5)]).unwrap();
        let d = Disorder::sample(&m, 3, 17).unwrap();
        let domain = Domain::new(3, 1.0, None).unwrap();
        let mut c = Chain::new(&d, domain, 1.5, 0.6, stream(1, Purpose::Chain, 0));
        for _ in 0..10_000 {
            c.step();
        }
        let mut flow = [[0u64; 6]; 6];
        let mut from = cell(c.state());
        for _ in 0..1_000_000 {
            c.step();
            let to = cell(c.state());
            flow[from][to] += 1;
            from = to;
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                let (a, b) = (flow[i][j] as f64, flow[j][i] as f64);
                let se = (a + b).sqrt().max(1.0);
                assert!((a - b).abs() < 5.0 * se, "flow {i}->{j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn band_chain_stays_in_band() {
        let d = Disorder::sample(&Mixture::pure(3), 24, 2).unwrap();
        let center = Configuration::canonical(24, 0.4).unwrap();
        let band = BandSpec::new(center, 0.1).unwrap();
        let domain = Domain::new(24, 1.0, Some(&band)).unwrap();
        let cfg = EnsembleConfig { burn_in: 500, samples: 300, thin: 2, eta: 0.2, swaps: true, keep: Some(1) };
        let out = run_ensemble(&d, &domain, &[0.0, 1.0], &cfg, stream(3, Purpose::Chain, 0)).unwrap();
        assert_eq!(out.points.len(), 300);
        for p in &out.points {
            assert!(band.contains_raw(p));
            assert!((dot(p, p) / 24.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn thin_band_with_large_step_is_a_tuning_error() {
        let d = Disorder::sample(&Mixture::pure(2), 400, 2).unwrap();
        let center = Configuration::canonical(400, 0.5).unwrap();
        let band = BandSpec::new(center, 1e-4).unwrap();
        let domain = Domain::new(400, 1.0, Some(&band)).unwrap();
        let cfg = EnsembleConfig { burn_in: 0, samples: 1, thin: 1, eta: 2.0, swaps: false, keep: None };
        let err = run_ensemble(&d, &domain, &[1.0], &cfg, stream(3, Purpose::Chain, 0)).unwrap_err();
        assert!(matches!(err, GlassError::Tuning { suggested_eta, .. } if suggested_eta < 0.01));
    }
}
