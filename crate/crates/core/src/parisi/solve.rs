//! Minimisation of the functional over k-atom measures.
//!
//! Atom positions come from a softmax over the k+1 gaps of `[0,1]` (or over
//! k gaps when the first atom is pinned at zero) and weights from a softmax
//! over k logits, so every parameter vector is a valid measure with
//! `q_max < 1`. BFGS runs in short rounds restarted from the best point,
//! which keeps the inverse-Hessian estimate honest near degenerate faces.
//! The line search only backtracks, so parameter vectors the functional
//! cannot evaluate are simply stepped away from.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::functional::{cs_functional, FirstVariation, StepProfile};
use super::measure::ParisiMeasure;
use crate::error::{GlassError, Result};
use crate::exec::Execution;
use crate::mixture::Mixture;
use crate::rng::{self, Purpose};

pub const MERGE_ATOM_TOL: f64 = 1e-8;
pub const MERGE_WEIGHT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Random starts per variant (free / pinned first atom) and atom count.
    pub random_starts: usize,
    pub seed: u64,
    pub rounds: usize,
    pub iters_per_round: u64,
    pub grad_tol: f64,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            random_starts: 2,
            seed: 0x5eed,
            rounds: 60,
            iters_per_round: 200,
            grad_tol: 1e-12,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParisiSolution {
    pub measure: ParisiMeasure,
    pub value: f64,
    pub converged: bool,
    pub iterations: u64,
    pub starts: usize,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    k: usize,
    pinned: bool,
}

impl Layout {
    fn gaps(&self) -> usize {
        if self.pinned {
            self.k
        } else {
            self.k + 1
        }
    }

    fn dim(&self) -> usize {
        self.gaps() + self.k
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn softmax_pullback(s: &[f64], g: &[f64]) -> Vec<f64> {
    let avg: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
    s.iter().zip(g).map(|(a, b)| a * (b - avg)).collect()
}

struct Decoded {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    cum: Vec<f64>,
    gaps: Vec<f64>,
}

fn decode(layout: Layout, z: &[f64]) -> Decoded {
    let g = layout.gaps();
    let gaps = softmax(&z[..g]);
    let weights = softmax(&z[g..]);
    let mut atoms = Vec::with_capacity(layout.k);
    let mut acc = 0.0;
    if layout.pinned {
        atoms.push(0.0);
        for s in &gaps[..layout.k - 1] {
            acc += s;
            atoms.push(acc);
        }
    } else {
        for s in &gaps[..layout.k] {
            acc += s;
            atoms.push(acc);
        }
    }
    let mut c = 0.0;
    let mut cum: Vec<f64> = weights
        .iter()
        .map(|w| {
            c += w;
            c
        })
        .collect();
    *cum.last_mut().unwrap() = 1.0;
    Decoded { atoms, weights, cum, gaps }
}

fn encode(layout: Layout, atoms: &[f64], weights: &[f64]) -> Vec<f64> {
    let floor = 1e-300;
    let mut z = Vec::with_capacity(layout.dim());
    let mut prev = if layout.pinned { atoms[0] } else { 0.0 };
    let start = if layout.pinned { 1 } else { 0 };
    for &a in &atoms[start..] {
        z.push((a - prev).max(floor).ln());
        prev = a;
    }
    z.push((1.0 - prev).max(floor).ln());
    z.extend(weights.iter().map(|w| w.max(floor).ln()));
    z
}

#[derive(Clone)]
struct Objective<'a> {
    mixture: &'a Mixture,
    beta: f64,
    layout: Layout,
}

impl Objective<'_> {
    fn evaluate(&self, z: &[f64]) -> Option<(f64, Vec<f64>)> {
        let d = decode(self.layout, z);
        let profile = if self.layout.pinned {
            let mut g = Vec::with_capacity(d.gaps.len() + 1);
            g.push(0.0);
            g.extend(&d.gaps);
            StepProfile::from_gaps(&g, &d.cum)
        } else {
            StepProfile::from_gaps(&d.gaps, &d.cum)
        }
        .ok()?;
        let fv = FirstVariation::from_profile(profile, self.mixture, self.beta);
        let value = fv.value();
        if !value.is_finite() {
            return None;
        }
        let (dq, dc) = fv.gradient();
        let k = self.layout.k;
        // ∂P/∂w_i = Σ_{j≥i, j<k-1} ∂P/∂c_j
        let mut dw = vec![0.0; k];
        let mut acc = 0.0;
        for i in (0..k).rev() {
            acc += dc[i];
            dw[i] = acc;
        }
        // ∂P/∂s_i = Σ of ∂P/∂q_j over atoms that include gap i
        let g = self.layout.gaps();
        let mut ds = vec![0.0; g];
        for (i, slot) in ds.iter_mut().enumerate() {
            let first = if self.layout.pinned { i + 1 } else { i };
            *slot = dq.iter().skip(first).sum();
        }
        let mut grad = softmax_pullback(&d.gaps, &ds);
        grad.extend(softmax_pullback(&d.weights, &dw));
        Some((value, grad))
    }
}

#[derive(Debug, Clone)]
struct Run {
    value: f64,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    converged: bool,
    iterations: u64,
    pinned: bool,
}

struct Descent {
    z: Vec<f64>,
    value: f64,
    grad_norm: f64,
    iterations: u64,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// BFGS on the inverse Hessian with Armijo backtracking; the update is
// skipped when the curvature condition fails and the Hessian estimate is
// reset to the identity every `iters_per_round` steps.
fn bfgs<F>(f: F, z0: Vec<f64>, opts: &SolveOptions) -> Option<Descent>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = z0.len();
    let (f0, g0) = f(&z0)?;
    let scale = 1.0 + f0.abs();
    let (mut z, mut fz, mut g) = (z0, f0 / scale, g0.into_iter().map(|v| v / scale).collect::<Vec<_>>());
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut [f64]| {
        h.iter_mut().for_each(|v| *v = 0.0);
        (0..n).for_each(|i| h[i * n + i] = 1.0);
    };
    reset(&mut h);
    let mut iterations = 0u64;
    let mut since_reset = 0u64;
    let max_iters = opts.rounds as u64 * opts.iters_per_round;
    let mut stalls = 0;
    while iterations < max_iters && norm_inf(&g) > opts.grad_tol {
        iterations += 1;
        since_reset += 1;
        if since_reset > opts.iters_per_round {
            reset(&mut h);
            since_reset = 0;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            reset(&mut h);
            p = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        // logits beyond a few units of change are meaningless after a softmax
        let cap = 4.0 / norm_inf(&p).max(4.0);
        let mut t = cap;
        let found = loop {
            let trial: Vec<f64> = z.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            if let Some((v, gt)) = f(&trial) {
                let v = v / scale;
                if v <= fz + 1e-4 * t * slope {
                    break Some((trial, v, gt.into_iter().map(|x| x / scale).collect::<Vec<f64>>()));
                }
            }
            t *= 0.5;
            if t < 1e-14 * cap {
                break None;
            }
        };
        let Some((zn, fnew, gn)) = found else {
            if since_reset == 1 {
                break;
            }
            reset(&mut h);
            since_reset = 0;
            continue;
        };
        let s: Vec<f64> = zn.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if sy > 1e-12 * (ss * yy).sqrt() {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        stalls = if fz - fnew <= 1e-15 * fz.abs().max(1.0) { stalls + 1 } else { 0 };
        z = zn;
        fz = fnew;
        g = gn;
        if stalls >= 20 {
            break;
        }
    }
    Some(Descent { value: fz * scale, grad_norm: norm_inf(&g), z, iterations })
}

fn run_start(m: &Mixture, beta: f64, layout: Layout, z0: Vec<f64>, opts: &SolveOptions) -> Option<Run> {
    let obj = Objective { mixture: m, beta, layout };
    let d = bfgs(|z| obj.evaluate(z), z0, opts)?;
    // flat directions (vanishing weights, merging atoms) stall the descent
    // before the gradient test fires; judge convergence by the gradient
    let converged = d.grad_norm <= opts.grad_tol.sqrt();
    let dec = decode(layout, &d.z);
    Some(Run {
        value: d.value,
        atoms: dec.atoms,
        weights: dec.weights,
        converged,
        iterations: d.iterations,
        pinned: layout.pinned,
    })
}

/// Embeds a (k-1)-atom solution into k atoms by inserting a light atom in
/// each gap in turn.
fn refinements(prev: &Run) -> Vec<(Layout, Vec<f64>)> {
    let k = prev.atoms.len() + 1;
    let layout = Layout { k, pinned: prev.pinned };
    let mut out = Vec::new();
    let mut bounds = vec![0.0];
    bounds.extend(prev.atoms.iter().copied());
    bounds.push(1.0);
    for i in 0..bounds.len() - 1 {
        if prev.pinned && i == 0 {
            continue;
        }
        let q = 0.5 * (bounds[i] + bounds[i + 1]);
        let mut atoms = prev.atoms.clone();
        let mut weights: Vec<f64> = prev.weights.iter().map(|w| w * 0.95).collect();
        let pos = atoms.partition_point(|&a| a < q);
        atoms.insert(pos, q);
        weights.insert(pos, 0.05);
        out.push((layout, encode(layout, &atoms, &weights)));
    }
    out
}

fn better(a: &Run, b: &Run) -> bool {
    // prefer the pinned variant on near-ties: its zero atom is exact
    let tol = 1e-13 * a.value.abs().max(1.0);
    if (a.value - b.value).abs() <= tol {
        return a.pinned && !b.pinned;
    }
    a.value < b.value
}

/// Minimises the functional over measures with at most `k` atoms.
pub fn solve(m: &Mixture, beta: f64, k: usize, opts: &SolveOptions) -> Result<ParisiSolution> {
    solve_with_start(m, beta, k, opts, None)
}

/// As [`solve`], adding `warm` (and its one-atom refinements) to the starts.
pub fn solve_with_start(
    m: &Mixture,
    beta: f64,
    k: usize,
    opts: &SolveOptions,
    warm: Option<&ParisiMeasure>,
) -> Result<ParisiSolution> {
    if k == 0 {
        return Err(GlassError::invalid("k", "need at least one atom"));
    }
    if let Some(w) = warm {
        if w.len() > k {
            return Err(GlassError::invalid("warm", "warm start has more atoms than k"));
        }
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(GlassError::invalid("beta", format!("must be positive, got {beta}")));
    }
    let mut best: Option<Run> = None;
    let mut level_best: Vec<Run> = Vec::new();
    let mut total_starts = 0;
    let mut all_converged = true;
    let mut iterations = 0;
    for kk in 1..=k {
        let mut starts: Vec<(Layout, Vec<f64>)> = Vec::new();
        for pinned in [true, false] {
            let layout = Layout { k: kk, pinned };
            starts.push((layout, vec![0.0; layout.dim()]));
            let mut rng = rng::stream(opts.seed, Purpose::Solver, (kk as u64) << 1 | pinned as u64);
            for _ in 0..opts.random_starts {
                let z: Vec<f64> = (0..layout.dim()).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
                starts.push((layout, z));
            }
        }
        for prev in &level_best {
            starts.extend(refinements(prev));
        }
        if let Some(w) = warm.filter(|w| w.q_max() < 1.0) {
            let seed_run = Run {
                value: f64::NAN,
                atoms: w.atoms().to_vec(),
                weights: w.weights().to_vec(),
                converged: false,
                iterations: 0,
                pinned: w.atoms()[0] == 0.0,
            };
            if w.len() == kk {
                let layout = Layout { k: kk, pinned: seed_run.pinned };
                starts.push((layout, encode(layout, &seed_run.atoms, &seed_run.weights)));
            } else if w.len() + 1 == kk {
                starts.extend(refinements(&seed_run));
            }
        }
        total_starts += starts.len();
        let runs: Vec<Run> = opts
            .execution
            .map_slice(&starts, |(layout, z)| run_start(m, beta, *layout, z.clone(), opts))
            .into_iter()
            .flatten()
            .collect();
        let mut candidates: Vec<Run> = Vec::new();
        for pinned in [true, false] {
            if let Some(r) = runs.iter().filter(|r| r.pinned == pinned).min_by(|a, b| a.value.total_cmp(&b.value)) {
                candidates.push(r.clone());
            }
        }
        if candidates.is_empty() {
            return Err(GlassError::Numerical(format!("every start failed at k = {kk}")));
        }
        for r in &candidates {
            iterations += r.iterations;
            if best.as_ref().is_none_or(|b| better(r, b)) {
                best = Some(r.clone());
            }
        }
        level_best = candidates;
    }
    let best = best.expect("at least one level ran");
    all_converged &= best.converged;
    finish(m, beta, &best, all_converged, iterations, total_starts)
}

fn finish(
    m: &Mixture,
    beta: f64,
    best: &Run,
    converged: bool,
    iterations: u64,
    starts: usize,
) -> Result<ParisiSolution> {
    let measure = ParisiMeasure::normalized(dedup_atoms(&best.atoms), merge_weights(&best.atoms, &best.weights))?
        .merged(MERGE_ATOM_TOL, MERGE_WEIGHT_TOL);
    let value = cs_functional(&measure, m, beta)?;
    Ok(ParisiSolution { measure, value, converged, iterations, starts })
}

/// Local continuation: optimises only from `warm` and, when it has fewer
/// than `k` atoms, from its one-atom refinements. Used along β ladders where
/// the previous rung's optimum is already close.
pub fn continue_from(
    m: &Mixture,
    beta: f64,
    k: usize,
    opts: &SolveOptions,
    warm: &ParisiMeasure,
) -> Result<ParisiSolution> {
    if warm.len() > k {
        return Err(GlassError::invalid("warm", "warm start has more atoms than k"));
    }
    if warm.q_max() >= 1.0 {
        return Err(GlassError::invalid("warm", "warm start has an atom at 1"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(GlassError::invalid("beta", format!("must be positive, got {beta}")));
    }
    let seed_run = Run {
        value: f64::NAN,
        atoms: warm.atoms().to_vec(),
        weights: warm.weights().to_vec(),
        converged: false,
        iterations: 0,
        pinned: warm.atoms()[0] == 0.0,
    };
    let layout = Layout { k: warm.len(), pinned: seed_run.pinned };
    let mut starts = vec![(layout, encode(layout, &seed_run.atoms, &seed_run.weights))];
    if warm.len() < k {
        starts.extend(refinements(&seed_run));
    }
    let runs: Vec<Run> = opts
        .execution
        .map_slice(&starts, |(layout, z)| run_start(m, beta, *layout, z.clone(), opts))
        .into_iter()
        .flatten()
        .collect();
    let best = runs
        .iter()
        .fold(None::<&Run>, |b, r| if b.is_none_or(|b| better(r, b)) { Some(r) } else { b })
        .ok_or_else(|| GlassError::Numerical("continuation failed from every start".into()))?;
    let iterations = runs.iter().map(|r| r.iterations).sum();
    finish(m, beta, best, best.converged, iterations, starts.len())
}

// softmax underflow can produce coincident atoms; fold them before validation
fn dedup_atoms(atoms: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &a in atoms {
        if out.last().is_none_or(|&l| a > l) {
            out.push(a);
        }
    }
    out
}

fn merge_weights(atoms: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut last: Option<f64> = None;
    for (&a, &w) in atoms.iter().zip(weights) {
        match last {
            Some(l) if a <= l => *out.last_mut().unwrap() += w,
            _ => {
                out.push(w.max(f64::MIN_POSITIVE));
                last = Some(a);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_round_trip() {
        let atoms = [0.0, 0.3, 0.7];
        let weights = [0.2, 0.5, 0.3];
        for pinned in [true, false] {
            let layout = Layout { k: 3, pinned };
            let a: Vec<f64> = if pinned { atoms.to_vec() } else { vec![0.1, 0.3, 0.7] };
            let d = decode(layout, &encode(layout, &a, &weights));
            for (x, y) in d.atoms.iter().zip(&a) {
                assert!((x - y).abs() < 1e-14);
            }
            for (x, y) in d.weights.iter().zip(&weights) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let m = Mixture::new([(2, 0.3), (3, 0.7)]).unwrap();
        for pinned in [true, false] {
            let layout = Layout { k: 3, pinned };
            let obj = Objective { mixture: &m, beta: 2.2, layout };
            let z: Vec<f64> = (0..layout.dim()).map(|i| 0.3 * (i as f64).sin()).collect();
            let (_, g) = obj.evaluate(&z).unwrap();
            for i in 0..z.len() {
                let h = 1e-6;
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                let fd = (obj.evaluate(&zp).unwrap().0 - obj.evaluate(&zm).unwrap().0) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7, "pinned={pinned} i={i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn replica_symmetric_two_spin() {
        let sol = solve(&Mixture::pure(2), 0.5, 3, &SolveOptions::default()).unwrap();
        assert!((sol.value - 0.125).abs() < 1e-8, "{}", sol.value);
        assert!(sol.measure.atoms()[0] < 1e-6);
    }

    #[test]
    fn two_spin_low_temperature_single_atom() {
        let beta: f64 = 1.0;
        let sol = solve(&Mixture::pure(2), beta, 2, &SolveOptions::default()).unwrap();
        let qp = 1.0 - 1.0 / (beta * 2f64.sqrt());
        let exact = 0.5 * (beta * beta * (1.0 - qp * qp) + qp / (1.0 - qp) + (1.0 - qp).ln());
        assert!((sol.value - exact).abs() < 1e-9, "{} vs {exact}", sol.value);
        assert!(sol.value < 0.5 - 1e-4);
        assert!((sol.measure.q_max() - qp).abs() < 1e-4);
    }

    #[test]
    fn value_non_increasing_in_k() {
        let m = Mixture::new([(2, 0.5), (4, 0.5)]).unwrap();
        let opts = SolveOptions::default();
        let vals: Vec<f64> = (1..=3).map(|k| solve(&m, 1.5, k, &opts).unwrap().value).collect();
        assert!(vals[1] <= vals[0] + 1e-9 && vals[2] <= vals[1] + 1e-9, "{vals:?}");
    }
}
