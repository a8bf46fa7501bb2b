//! Ground-state energy `E⋆ = lim F(β)/β` from a ladder of finite-β solutions.
//!
//! The mixture is first normalised to `ν(1) = 1` and the result rescaled by
//! `√ν(1)`, which is exact by linearity of `H` in the disorder amplitude.
//! On the ladder we fit `F(β) ≈ βE⋆ + c + a log β + b/β`; the logarithm
//! comes from the `log(1 - q_max)` term, whose argument closes like `1/β`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::measure::ParisiMeasure;
use super::solve::{continue_from, solve, SolveOptions};
use crate::error::{GlassError, Result};
use crate::mixture::Mixture;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ZeroTemperatureOptions {
    pub beta_min: f64,
    pub beta_max: f64,
    pub ladder_len: usize,
    /// Number of top ladder rungs used in the fit.
    pub fit_window: usize,
    pub atoms: usize,
    pub residual_tol: f64,
    pub solve: SolveOptions,
}

impl Default for ZeroTemperatureOptions {
    fn default() -> Self {
        ZeroTemperatureOptions {
            beta_min: 8.0,
            beta_max: 512.0,
            ladder_len: 13,
            fit_window: 9,
            atoms: 3,
            residual_tol: 1e-6,
            solve: SolveOptions::default(),
        }
    }
}

impl ZeroTemperatureOptions {
    pub fn ladder(&self) -> Vec<f64> {
        let n = self.ladder_len.max(2);
        let r = (self.beta_max / self.beta_min).powf(1.0 / (n - 1) as f64);
        (0..n).map(|i| self.beta_min * r.powi(i as i32)).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroTemperature {
    pub e_star: f64,
    /// Fit coefficients `[E⋆, c, a, b]` for the normalised mixture.
    pub fit: [f64; 4],
    pub residual_rms: f64,
    pub flagged: bool,
    /// `(β, F(β))` of the normalised mixture.
    pub ladder: Vec<(f64, f64)>,
}

pub fn zero_temperature(m: &Mixture, opts: &ZeroTemperatureOptions) -> Result<ZeroTemperature> {
    if opts.fit_window < 4 || opts.fit_window > opts.ladder_len {
        return Err(GlassError::invalid("fit_window", "need 4 <= fit_window <= ladder_len"));
    }
    if !(opts.beta_min > 0.0 && opts.beta_max > opts.beta_min) {
        return Err(GlassError::invalid("beta_min", "need 0 < beta_min < beta_max"));
    }
    let scale = m.variance();
    let unit = m.scaled(1.0 / scale)?;
    let betas = opts.ladder();
    let mut values = Vec::with_capacity(betas.len());
    let mut flagged = false;
    let mut warm: Option<ParisiMeasure> = None;
    for &b in &betas {
        let sol = match &warm {
            Some(w) => continue_from(&unit, b, opts.atoms, &opts.solve, w)?,
            None => solve(&unit, b, opts.atoms, &opts.solve)?,
        };
        flagged |= !sol.converged;
        values.push(sol.value);
        warm = Some(sol.measure);
    }
    let start = betas.len() - opts.fit_window;
    let rows = opts.fit_window;
    let a = DMatrix::from_fn(rows, 4, |i, j| {
        let b = betas[start + i];
        match j {
            0 => b,
            1 => 1.0,
            2 => b.ln(),
            _ => 1.0 / b,
        }
    });
    let y = DVector::from_iterator(rows, values[start..].iter().copied());
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| GlassError::Numerical(format!("ladder regression failed: {e}")))?;
    let resid = &a * &coef - &y;
    let residual_rms = (resid.norm_squared() / rows as f64).sqrt();
    flagged |= residual_rms > opts.residual_tol;
    Ok(ZeroTemperature {
        e_star: coef[0] * scale.sqrt(),
        fit: [coef[0], coef[1], coef[2], coef[3]],
        residual_rms,
        flagged,
        ladder: betas.into_iter().zip(values).collect(),
    })
}

/// `E⋆(q)`: the ground-state energy on `S^{N-1}(q)`, via the inner-sphere mixture.
pub fn ground_state_energy(m: &Mixture, q: f64, opts: &ZeroTemperatureOptions) -> Result<ZeroTemperature> {
    let inner = if q == 1.0 { m.clone() } else { m.inner_sphere(q)? };
    zero_temperature(&inner, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_spin_ground_state() {
        let z = zero_temperature(&Mixture::pure(2), &ZeroTemperatureOptions::default()).unwrap();
        assert!((z.e_star - 2f64.sqrt()).abs() < 1e-3, "{z:?}");
        assert!(!z.flagged, "{z:?}");
    }

    #[test]
    fn amplitude_scaling() {
        let opts = ZeroTemperatureOptions::default();
        let tiny = Mixture::new([(2, 1e-12)]).unwrap();
        let z = zero_temperature(&tiny, &opts).unwrap();
        assert!((z.e_star - 2f64.sqrt() * 1e-6).abs() < 1e-9);
        let q = 0.6;
        let zq = ground_state_energy(&Mixture::pure(2), q, &opts).unwrap();
        assert!((zq.e_star - q * 2f64.sqrt()).abs() < 1e-3);
    }

    // direct zero-temperature functional with a one-step γ = u·1[a,1)
    fn one_step_oracle(m: &Mixture) -> f64 {
        use argmin::core::{CostFunction, Executor};
        use argmin::solver::neldermead::NelderMead;
        struct F<'a>(&'a Mixture);
        impl CostFunction for F<'_> {
            type Param = Vec<f64>;
            type Output = f64;
            fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
                let (l, u, a) = (p[0].exp(), p[1].exp(), 1.0 / (1.0 + (-p[2]).exp()));
                let nu = |x: f64| self.0.value(x);
                let d1 = self.0.eval(1.0, 1);
                let top = l + u * (1.0 - a);
                let tail = (top / l).ln() / u;
                Ok(0.5 * (d1 * l + u * (nu(1.0) - nu(a)) + a / top + tail))
            }
        }
        let simplex = vec![vec![0.0, 0.0, 0.0], vec![0.7, 0.0, 0.0], vec![0.0, 0.7, 0.0], vec![0.0, 0.0, 0.7]];
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-13).unwrap();
        let res = Executor::new(F(m), solver).configure(|s| s.max_iters(20_000)).run().unwrap();
        res.state().best_cost
    }

    #[test]
    fn three_spin_matches_direct_functional() {
        let m = Mixture::pure(3);
        let oracle = one_step_oracle(&m);
        assert!((oracle - 1.6575).abs() < 1e-3, "{oracle}");
        let z = zero_temperature(&m, &ZeroTemperatureOptions::default()).unwrap();
        assert!((z.e_star - oracle).abs() < 1e-3, "{} vs {oracle}", z.e_star);
    }
}
