//! The experiment pipelines.

use glasslab::exec::mean;
use glasslab::groundstate::{minimize_on_sphere, GroundStateOptions};
use glasslab::parisi::{solve, validate, ParisiMeasure, SolveOptions};
use glasslab::rng::{derive_seed, Purpose};
use glasslab::sampler::{free_energy_ti, mcmc_chain, split_rhat, write_dump, RunManifest, SamplerOptions};
use glasslab::states::{
    cluster_states, gg_defect, overlap_histogram, overlap_matrix, ultrametricity_defect_with, write_defect_csv,
    DefectRow, GgOptions, OverlapMatrix, Psi, TestFn, UltraOptions,
};
use glasslab::tap::{tap_consistency, TapOptions};
use glasslab::{Configuration, Disorder, Execution, Mixture, Result};
use serde::Serialize;

use crate::config::{ExperimentConfig, Kind};
use crate::landscape;
use crate::output::Sink;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub kind: Kind,
    /// All requested checks passed (true when there are none).
    pub passed: bool,
    /// Some estimate carries a numerical flag.
    pub flagged: bool,
    pub checks: Vec<Check>,
    pub results: serde_json::Value,
    pub files: Vec<String>,
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub mixture: Mixture,
    pub execution: Execution,
}

impl Ctx<'_> {
    pub fn disorder(&self, k: usize) -> Result<Disorder> {
        Disorder::sample(&self.mixture, self.cfg.n, derive_seed(self.cfg.seed, Purpose::Tensor, k as u64))
    }

    pub fn sampler(&self, tag: u64) -> SamplerOptions {
        self.cfg.sampler_options(derive_seed(self.cfg.seed, Purpose::Chain, tag), self.execution)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            seed: derive_seed(self.cfg.seed, Purpose::Solver, 0),
            execution: self.execution,
            ..Default::default()
        }
    }
}

pub(crate) struct Outcome {
    pub checks: Vec<Check>,
    pub flagged: bool,
    pub results: serde_json::Value,
}

/// Runs the pipeline named by `cfg.kind`, writing the manifest, the result
/// tables and `summary.json` into the sink.
pub fn run(cfg: &ExperimentConfig, execution: Execution, sink: &mut Sink) -> Result<Summary> {
    cfg.validate()?;
    let ctx = Ctx { cfg, mixture: cfg.mixture()?, execution };
    let mut manifest = RunManifest::new(cfg.kind.as_str(), serde_json::to_value(cfg)?);
    manifest.seeds = (0..cfg.disorders).map(|k| derive_seed(cfg.seed, Purpose::Tensor, k as u64)).collect();
    manifest.seeds.insert(0, cfg.seed);
    manifest.grids = vec![cfg.betas.clone()];
    sink.raw("manifest.json", |w| manifest.write(w))?;

    let out = match cfg.kind {
        Kind::Simulate => simulate(&ctx, sink)?,
        Kind::FreeEnergy => free_energy(&ctx, sink)?,
        Kind::GroundState => ground_state(&ctx, sink)?,
        Kind::Parisi => parisi(&ctx, sink)?,
        Kind::Tap => tap(&ctx, sink)?,
        Kind::States => states(&ctx, sink)?,
        Kind::Landscape => landscape::scan(&ctx, sink)?,
    };
    let mut files = sink.written().to_vec();
    files.push("summary.json".into());
    let summary = Summary {
        kind: cfg.kind,
        passed: out.checks.iter().all(|c| c.passed),
        flagged: out.flagged,
        checks: out.checks,
        results: out.results,
        files,
    };
    sink.json("summary.json", &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct EnergyRow {
    disorder: usize,
    beta: f64,
    chain: usize,
    record: usize,
    energy_per_site: f64,
}

#[derive(Serialize)]
struct ChainSummary {
    disorder: usize,
    beta: f64,
    mean_energy_per_site: f64,
    acceptance: f64,
    rhat: f64,
}

fn simulate(ctx: &Ctx, sink: &mut Sink) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let n = cfg.n as f64;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut flagged = false;
    for k in 0..cfg.disorders {
        let d = ctx.disorder(k)?;
        for (b, &beta) in cfg.betas.iter().enumerate() {
            let opts = ctx.sampler((k * cfg.betas.len() + b) as u64);
            let s = mcmc_chain(&d, beta, 1.0, None, &opts)?;
            let mut per_chain: Vec<Vec<f64>> = vec![Vec::new(); opts.chains];
            for (&c, &e) in s.meta.chain_ids.iter().zip(&s.energies) {
                rows.push(EnergyRow {
                    disorder: k,
                    beta,
                    chain: c,
                    record: per_chain[c].len(),
                    energy_per_site: e / n,
                });
                per_chain[c].push(e / n);
            }
            let slices: Vec<&[f64]> = per_chain.iter().map(|c| c.as_slice()).collect();
            let rhat = if beta > 0.0 { split_rhat(&slices) } else { 1.0 };
            flagged |= rhat > opts.rhat_max;
            runs.push(ChainSummary {
                disorder: k,
                beta,
                mean_energy_per_site: mean(&s.energies) / n,
                acceptance: mean(&s.meta.acceptance),
                rhat,
            });
            sink.raw(&format!("samples_d{k}_b{b}.bin"), |w| write_dump(&s, w))?;
        }
    }
    sink.table("energies", &rows)?;
    sink.table("chains", &runs)?;
    Ok(Outcome { checks: Vec::new(), flagged, results: serde_json::to_value(&runs)? })
}

#[derive(Serialize)]
struct FeRow {
    disorder: usize,
    beta: f64,
    value: f64,
    std_error: f64,
    method: String,
    flags: String,
}

#[derive(Serialize)]
struct FeAverage {
    beta: f64,
    value: f64,
    std_error: f64,
    annealed: f64,
}

fn free_energy(ctx: &Ctx, sink: &mut Sink) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let mut rows = Vec::new();
    let mut flagged = false;
    let disorders: Vec<Disorder> = (0..cfg.disorders).map(|k| ctx.disorder(k)).collect::<Result<_>>()?;
    for (b, &beta) in cfg.betas.iter().enumerate() {
        for (k, d) in disorders.iter().enumerate() {
            let e = free_energy_ti(d, beta, cfg.sampler.grid, &ctx.sampler((k * cfg.betas.len() + b) as u64))?;
            flagged |= e.is_flagged();
            rows.push(FeRow {
                disorder: k,
                beta,
                value: e.value,
                std_error: e.std_error,
                method: e.method.as_str().into(),
                flags: e.flags.describe(),
            });
        }
    }
    let mut averages = Vec::new();
    let mut checks = Vec::new();
    for (b, &beta) in cfg.betas.iter().enumerate() {
        let group = &rows[b * cfg.disorders..(b + 1) * cfg.disorders];
        let vals: Vec<f64> = group.iter().map(|r| r.value).collect();
        let d = vals.len() as f64;
        let spread = if vals.len() > 1 { glasslab::exec::variance(&vals) / d } else { 0.0 };
        let within = group.iter().map(|r| r.std_error * r.std_error).sum::<f64>() / (d * d);
        let avg = FeAverage {
            beta,
            value: mean(&vals),
            std_error: (spread + within).sqrt(),
            annealed: 0.5 * beta * beta * ctx.mixture.value(1.0),
        };
        checks.push(Check {
            name: format!("annealed bound at beta={beta}"),
            passed: avg.value <= avg.annealed + 3.0 * avg.std_error,
            detail: format!("{:.6} ± {:.6} vs {:.6}", avg.value, avg.std_error, avg.annealed),
        });
        averages.push(avg);
    }
    sink.table("free_energy", &rows)?;
    Ok(Outcome { checks, flagged, results: serde_json::to_value(&averages)? })
}

#[derive(Serialize)]
struct GsRow {
    disorder: usize,
    q: f64,
    restarts: usize,
    value_per_site: f64,
    converged: bool,
    tangential_grad: f64,
}

fn ground_state(ctx: &Ctx, sink: &mut Sink) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let q = cfg.schedule.q;
    let mut rows = Vec::new();
    for k in 0..cfg.disorders {
        let d = ctx.disorder(k)?;
        let opts = GroundStateOptions {
            seed: derive_seed(cfg.seed, Purpose::Restart, k as u64),
            execution: ctx.execution,
            ..Default::default()
        };
        let g = minimize_on_sphere(&d, q, cfg.restarts, &opts)?;
        rows.push(GsRow {
            disorder: k,
            q,
            restarts: g.restarts_used,
            value_per_site: g.value_per_site,
            converged: g.converged,
            tangential_grad: g.tangential_grad,
        });
    }
    let flagged = rows.iter().any(|r| !r.converged);
    sink.table("ground_state", &rows)?;
    let values: Vec<f64> = rows.iter().map(|r| r.value_per_site).collect();
    Ok(Outcome {
        checks: Vec::new(),
        flagged,
        results: serde_json::json!({ "q": q, "mean_value_per_site": mean(&values), "values": values }),
    })
}

#[derive(Serialize)]
struct ParisiRow {
    beta: f64,
    value: f64,
    q_max: f64,
    atoms: usize,
    converged: bool,
}

#[derive(Serialize)]
struct MeasureRecord<'a> {
    beta: f64,
    measure: &'a ParisiMeasure,
}

fn parisi(ctx: &Ctx, sink: &mut Sink) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let mut rows = Vec::new();
    let mut measures = Vec::new();
    let mut checks = Vec::new();
    for &beta in &cfg.betas {
        if beta == 0.0 {
            rows.push(ParisiRow { beta, value: 0.0, q_max: 0.0, atoms: 1, converged: true });
            measures.push((beta, ParisiMeasure::dirac(0.0)?));
            continue;
        }
        let sol = solve(&ctx.mixture, beta, cfg.atoms, &ctx.solve_options())?;
        let v = validate(&sol.measure, &ctx.mixture, beta, 1e-6)?;
        checks.push(Check {
            name: format!("stationarity at beta={beta}"),
            passed: v.passed,
            detail: format!("sup f {:.3e} at q={:.4}", v.sup_f, v.argsup_f),
        });
        rows.push(ParisiRow {
            beta,
            value: sol.value,
            q_max: sol.measure.q_max(),
            atoms: sol.measure.len(),
            converged: sol.converged,
        });
        measures.push((beta, sol.measure));
    }
    let flagged = rows.iter().any(|r| !r.converged);
    sink.table("parisi", &rows)?;
    let records: Vec<MeasureRecord> =
        measures.iter().map(|(beta, m)| MeasureRecord { beta: *beta, measure: m }).collect();
    sink.json("measures.json", &records)?;
    Ok(Outcome { checks, flagged, results: serde_json::to_value(&rows)? })
}

fn tap(ctx: &Ctx, sink: &mut Sink) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let opts = TapOptions { atoms: cfg.atoms, solve: ctx.solve_options(), ..Default::default() };
    let mut checks = Vec::new();
    let mut flagged = false;
    let mut reports = Vec::new();
    for (b, &beta) in cfg.betas.iter().enumerate() {
        let r = tap_consistency(&ctx.mixture, beta, &opts)?;
        for c in &r.checks {
            checks.push(Check {
                name: format!("{} at beta={beta}", c.name),
                passed: c.passed,
                detail: format!("margin {:.3e}", c.margin),
            });
        }
        flagged |= r.flagged;
        if let Some(p) = &r.profile {
            sink.table(&format!("tap_profile_b{b}"), &p.nodes)?;
        }
        reports.push(r);
    }
    sink.json("tap_reports.json", &reports)?;
    Ok(Outcome { checks, flagged, results: serde_json::to_value(&reports)? })
}

#[derive(Serialize)]
struct HistRow {
    disorder: usize,
    beta: f64,
    lo: f64,
    hi: f64,
    mass: f64,
}

#[derive(Serialize)]
struct StateRow {
    disorder: usize,
    beta: f64,
    q_star: f64,
    clusters: usize,
    largest_weight: f64,
    pair_violation: f64,
    ultrametricity: f64,
}

// at most `keep` records, interleaving chains so neighbours are far apart in time
fn spread_sample(points: &[Configuration], chain_ids: &[usize], keep: usize) -> Vec<Configuration> {
    let chains = chain_ids.iter().max().map_or(0, |c| c + 1);
    let mut by_chain: Vec<Vec<&Configuration>> = vec![Vec::new(); chains];
    for (p, &c) in points.iter().zip(chain_ids) {
        by_chain[c].push(p);
    }
    let len = by_chain.iter().map(Vec::len).min().unwrap_or(0);
    let per = (keep / chains.max(1)).clamp(1, len.max(1));
    let stride = (len / per).max(1);
    let mut out = Vec::new();
    for r in (0..len).step_by(stride).take(per) {
        for c in &by_chain {
            out.push(c[r].clone());
        }
    }
    out
}

const STATES_KEEP: usize = 240;

fn states(ctx: &Ctx, sink: &mut Sink) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let mut hist = Vec::new();
    let mut rows = Vec::new();
    let mut defects = Vec::new();
    for (b, &beta) in cfg.betas.iter().enumerate() {
        let q_star = match cfg.q_star {
            Some(q) => q,
            None if beta > 0.0 => solve(&ctx.mixture, beta, cfg.atoms, &ctx.solve_options())?.measure.q_max(),
            None => 0.0,
        };
        let mut sets: Vec<OverlapMatrix> = Vec::new();
        for k in 0..cfg.disorders {
            let d = ctx.disorder(k)?;
            let s = mcmc_chain(&d, beta, 1.0, None, &ctx.sampler((k * cfg.betas.len() + b) as u64))?;
            let pts = spread_sample(&s.points, &s.meta.chain_ids, STATES_KEEP);
            let m = overlap_matrix(&pts)?;
            let h = overlap_histogram(&m, 40)?;
            for (i, mass) in h.mass.iter().enumerate() {
                hist.push(HistRow { disorder: k, beta, lo: h.edges[i], hi: h.edges[i + 1], mass: *mass });
            }
            let uopts = UltraOptions {
                seed: derive_seed(cfg.seed, Purpose::Subset, k as u64),
                execution: ctx.execution,
                ..Default::default()
            };
            let um = ultrametricity_defect_with(&m, cfg.eps, &uopts)?;
            defects.push(DefectRow {
                kind: format!("ultrametricity d{k} beta={beta}"),
                parameter: cfg.eps,
                value: um,
                std_error: 0.0,
            });
            let (clusters, largest, violation) = if q_star > cfg.eps {
                let dec = cluster_states(&pts, q_star, cfg.eps)?;
                (dec.clusters.len(), dec.weights.first().copied().unwrap_or(0.0), dec.pair_violation)
            } else {
                (1, 1.0, 0.0)
            };
            rows.push(StateRow {
                disorder: k,
                beta,
                q_star,
                clusters,
                largest_weight: largest,
                pair_violation: violation,
                ultrametricity: um,
            });
            sets.push(m);
        }
        let gg = gg_defect(
            &sets,
            2,
            Psi::Power(1),
            TestFn::Power { a: 0, b: 1, exponent: 1 },
            &GgOptions { seed: derive_seed(cfg.seed, Purpose::Bootstrap, b as u64), ..Default::default() },
        )?;
        defects.push(DefectRow {
            kind: format!("gg n=2 beta={beta}"),
            parameter: 2.0,
            value: gg.value,
            std_error: gg.std_error,
        });
    }
    sink.table("overlap_histogram", &hist)?;
    sink.table("states", &rows)?;
    sink.raw("defects.csv", |w| write_defect_csv(&defects, w))?;
    Ok(Outcome { checks: Vec::new(), flagged: false, results: serde_json::to_value(&rows)? })
}
