//! Free energies of bands around centres drawn at several energy levels.

use glasslab::geometry::default_band_width;
use glasslab::groundstate::{minimize_on_sphere, GroundStateOptions};
use glasslab::rng::{derive_seed, stream, Purpose};
use glasslab::sampler::{band_free_energy, centered_constrained_fe, mcmc_chain, FreeEnergyEstimate};
use glasslab::{BandSpec, Configuration, Disorder, Result};
use serde::Serialize;

use crate::output::Sink;
use crate::run::{Ctx, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Uniform,
    Tempered,
    NearGround,
}

#[derive(Debug, Clone, Serialize)]
pub struct LandscapeRow {
    pub disorder: usize,
    pub beta: f64,
    pub source: Source,
    pub center: usize,
    pub energy_per_site: f64,
    pub band: f64,
    pub band_se: f64,
    pub constrained: f64,
    pub constrained_se: f64,
    pub centered: f64,
    pub centered_se: f64,
    pub flags: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankCorrelation {
    pub disorder: usize,
    pub beta: f64,
    /// Spearman correlation of `−H(σ₀)/N` with the band free energy.
    pub spearman: Option<f64>,
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // ties share the mean rank
        let avg = 0.5 * (i + j) as f64;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Rank correlation with average ranks for ties; `None` when either side
/// is constant or there are fewer than two points.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn centers(ctx: &Ctx, d: &Disorder, k: usize, beta: f64) -> Result<Vec<(Source, Configuration)>> {
    let cfg = ctx.cfg;
    let (n, q) = (cfg.n, cfg.schedule.q);
    let mut out = Vec::new();
    let mut rng = stream(cfg.seed, Purpose::Uniform, k as u64);
    for _ in 0..cfg.centers {
        out.push((Source::Uniform, Configuration::uniform(n, q, &mut rng)?));
    }
    if beta > 0.0 {
        let mut opts = ctx.sampler(1 << 40 | k as u64);
        opts.chains = cfg.centers;
        let s = mcmc_chain(d, beta, q, None, &opts)?;
        for c in 0..cfg.centers {
            let last = s.chain(c).last().cloned().expect("every chain keeps a record");
            out.push((Source::Tempered, last));
        }
    }
    for c in 0..cfg.centers {
        let opts = GroundStateOptions {
            seed: derive_seed(cfg.seed, Purpose::Restart, (k * cfg.centers + c) as u64),
            execution: ctx.execution,
            ..Default::default()
        };
        out.push((Source::NearGround, minimize_on_sphere(d, q, cfg.restarts, &opts)?.minimizer));
    }
    Ok(out)
}

fn shifted(e: &FreeEnergyEstimate, by: f64) -> FreeEnergyEstimate {
    FreeEnergyEstimate { value: e.value + by, ..e.clone() }
}

pub(crate) fn scan(ctx: &Ctx, sink: &mut Sink) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let s = &cfg.schedule;
    let width = s.delta.unwrap_or_else(|| default_band_width(cfg.n));
    let mut rows = Vec::new();
    let mut correlations = Vec::new();
    let mut flagged = false;
    for k in 0..cfg.disorders {
        let d = ctx.disorder(k)?;
        for (b, &beta) in cfg.betas.iter().enumerate() {
            let first = rows.len();
            for (i, (source, center)) in centers(ctx, &d, k, beta)?.into_iter().enumerate() {
                let h0 = d.energy(&center)? / cfg.n as f64;
                let band = BandSpec::new(center, width)?;
                let opts = ctx.sampler(((k * cfg.betas.len() + b) << 16 | i) as u64);
                // a single replica carries no pair constraint
                let (fb, fc, fcc) = if s.m == 1 {
                    let fb = band_free_energy(&d, beta, &band, cfg.sampler.grid, &opts)?;
                    let fcc = shifted(&fb, beta * h0);
                    (fb.clone(), fb, fcc)
                } else {
                    let c = centered_constrained_fe(&d, beta, &band, s.m, s.rho, s.q, cfg.sampler.grid, &opts)?;
                    (c.band, c.constrained, c.centered)
                };
                flagged |= fb.is_flagged() || fc.is_flagged();
                rows.push(LandscapeRow {
                    disorder: k,
                    beta,
                    source,
                    center: i,
                    energy_per_site: h0,
                    band: fb.value,
                    band_se: fb.std_error,
                    constrained: fc.value,
                    constrained_se: fc.std_error,
                    centered: fcc.value,
                    centered_se: fcc.std_error,
                    flags: fb.flags.merge(&fc.flags).describe(),
                });
            }
            let group = &rows[first..];
            let x: Vec<f64> = group.iter().map(|r| -r.energy_per_site).collect();
            let y: Vec<f64> = group.iter().map(|r| r.band).collect();
            correlations.push(RankCorrelation { disorder: k, beta, spearman: spearman(&x, &y) });
        }
    }
    sink.table("landscape", &rows)?;
    sink.table("rank_correlation", &correlations)?;
    Ok(Outcome {
        checks: Vec::new(),
        flagged,
        results: serde_json::json!({ "rows": rows, "rank_correlation": correlations }),
    })
}
