//! Empirical ground states on inner spheres by projected gradient descent.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{GlassError, Result};
use crate::exec::Execution;
use crate::geometry::{dot, Configuration, SPHERE_TOL};
use crate::hamiltonian::Disorder;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundStateOptions {
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once `‖P⊥∇H‖/√N` falls below this.
    pub grad_tol: f64,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    pub execution: Execution,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            seed: 0,
            max_iters: 200_000,
            grad_tol: 1e-8,
            armijo: 1e-4,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateResult {
    pub minimizer: Configuration,
    pub value_per_site: f64,
    pub restarts_used: usize,
    pub converged: bool,
    /// `‖P⊥∇H‖/√N` at the minimizer.
    pub tangential_grad: f64,
    pub iterations: usize,
}

struct Descent {
    x: Vec<f64>,
    value: f64,
    tangential_grad: f64,
    converged: bool,
    iterations: usize,
}

// removes the radial part of g at x, in place; returns ‖P⊥g‖
fn project_tangent(x: &[f64], g: &mut [f64]) -> f64 {
    let c = dot(x, g) / dot(x, x);
    g.iter_mut().zip(x).for_each(|(gi, xi)| *gi -= c * xi);
    dot(g, g).sqrt()
}

fn retract(x: &mut [f64], radius: f64) {
    let s = radius / dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v *= s);
}

fn descend(d: &Disorder, mut x: Vec<f64>, radius: f64, opts: &GroundStateOptions) -> Descent {
    let n = d.dim() as f64;
    let step0 = 1.0 / n.sqrt();
    let mut value = d.energy_raw(&x);
    let mut step = step0;
    let mut trial = vec![0.0; x.len()];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut gnorm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let mut g = d.gradient_raw(&x);
        gnorm = project_tangent(&x, &mut g);
        if gnorm / n.sqrt() < opts.grad_tol {
            return Descent { x, value, tangential_grad: gnorm / n.sqrt(), converged: true, iterations };
        }
        iterations += 1;
        // Barzilai-Borwein trial step, else twice the last accepted one
        let mut s = match &prev {
            Some((px, pg)) => {
                let (mut ss, mut sy) = (0.0, 0.0);
                for i in 0..x.len() {
                    let dx = x[i] - px[i];
                    ss += dx * dx;
                    sy += dx * (g[i] - pg[i]);
                }
                if sy > 0.0 {
                    (ss / sy).clamp(1e-12 * step0, 1e6 * step0)
                } else {
                    2.0 * step
                }
            }
            None => step0,
        };
        // slack for rounding once decreases fall below the resolution of H
        let slack = 8.0 * f64::EPSILON * value.abs().max(1.0);
        let accepted = loop {
            trial.iter_mut().zip(&x).zip(&g).for_each(|((t, xi), gi)| *t = xi - s * gi);
            retract(&mut trial, radius);
            let v = d.energy_raw(&trial);
            if v <= value - opts.armijo * s * gnorm * gnorm + slack {
                break Some(v);
            }
            s *= 0.5;
            if s < 1e-20 * step0 {
                break None;
            }
        };
        match accepted {
            Some(v) => {
                prev = Some((x.clone(), g));
                std::mem::swap(&mut x, &mut trial);
                value = v;
                step = s;
            }
            None => break,
        }
    }
    let converged = gnorm / n.sqrt() < opts.grad_tol;
    Descent { x, value, tangential_grad: gnorm / n.sqrt(), converged, iterations }
}

/// Best of `restarts` descents from independent uniform points of `S^{N-1}(q)`.
pub fn minimize_on_sphere(
    d: &Disorder,
    q: f64,
    restarts: usize,
    opts: &GroundStateOptions,
) -> Result<GroundStateResult> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(GlassError::invalid("q", format!("must lie in (0,1], got {q}")));
    }
    if restarts == 0 {
        return Err(GlassError::invalid("restarts", "need at least one"));
    }
    d.materialize();
    let n = d.dim();
    let radius = (n as f64 * q).sqrt();
    let runs = opts.execution.map_range(restarts, |i| {
        let mut rng = rng::stream(opts.seed, Purpose::Restart, i as u64);
        let start = Configuration::uniform(n, q, &mut rng).expect("dimension checked by the disorder");
        descend(d, start.into_coords(), radius, opts)
    });
    // first strictly better run wins, so ties resolve to the lowest index
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value < runs[best].value {
            best = i;
        }
    }
    let r = runs.into_iter().nth(best).expect("restarts > 0");
    let minimizer = Configuration::on_sphere(r.x, q)?;
    let value_per_site = d.energy(&minimizer)? / n as f64;
    Ok(GroundStateResult {
        minimizer,
        value_per_site,
        restarts_used: restarts,
        converged: r.converged,
        tangential_grad: r.tangential_grad,
        iterations: r.iterations,
    })
}

/// Whether `σ ∈ S^{N-1}(q)` has `H(σ)/N < -E⋆(q) + τ`.
pub fn near_ground_set_membership(
    d: &Disorder,
    sigma: &Configuration,
    q: f64,
    tau: f64,
    e_star_q: f64,
) -> Result<bool> {
    if !sigma.is_on_sphere(q, SPHERE_TOL) {
        return Err(GlassError::invalid("sigma", format!("not on S^(N-1)({q}): |σ|²/N = {}", sigma.radius_sq())));
    }
    let e = d.energy(sigma)? / d.dim() as f64;
    Ok(e < -e_star_q + tau)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateRow {
    pub q: f64,
    pub restarts: usize,
    pub value_per_site: f64,
    pub converged: bool,
}

impl GroundStateResult {
    pub fn row(&self, q: f64) -> GroundStateRow {
        GroundStateRow {
            q,
            restarts: self.restarts_used,
            value_per_site: self.value_per_site,
            converged: self.converged,
        }
    }
}

pub fn write_csv<W: Write>(rows: &[GroundStateRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
