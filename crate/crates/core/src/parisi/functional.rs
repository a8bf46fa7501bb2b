//! Closed-form evaluation of the Crisanti–Sommers functional for step
//! distribution functions, its first variation, and the auxiliary functions
//! `F`, `f`, `d`, `Γ` used to test stationarity.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentRoot;

use super::measure::ParisiMeasure;
use crate::error::{GlassError, Result};
use crate::mixture::Mixture;

/// `-ln(1-r) / r`, stable for small `r`.
fn log_ratio(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        1.0 + r / 2.0 + r * r / 3.0 + r * r * r / 4.0
    } else {
        -(-r).ln_1p() / r
    }
}

/// `(-ln(1-r) - r) / r²`, stable for small `r`.
fn log_ratio2(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        0.5 + r / 3.0 + r * r / 4.0 + r * r * r / 5.0
    } else {
        (-(-r).ln_1p() - r) / (r * r)
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: f64,
    end: f64,
    // value of x on the segment
    c: f64,
    // x̂ at the segment start
    xhat: f64,
    // G(start) = ∫_0^start dq / x̂²
    g: f64,
    // ∫_0^start G
    int_g: f64,
}

impl Segment {
    fn xhat_at(&self, q: f64) -> f64 {
        self.xhat - self.c * (q - self.start)
    }

    /// `∫_start^{start+u} dq / x̂`.
    fn inv_integral(&self, u: f64) -> f64 {
        (u / self.xhat) * log_ratio(self.c * u / self.xhat)
    }

    fn big_g(&self, q: f64) -> f64 {
        self.big_g_offset(q - self.start)
    }

    fn big_g_offset(&self, u: f64) -> f64 {
        self.g + u / ((self.xhat - self.c * u) * self.xhat)
    }

    fn int_big_g(&self, q: f64) -> f64 {
        self.int_big_g_offset(q - self.start)
    }

    fn int_big_g_offset(&self, u: f64) -> f64 {
        let r = self.c * u / self.xhat;
        self.int_g + self.g * u + (u / self.xhat).powi(2) * log_ratio2(r)
    }
}

/// A step distribution function laid out on `[0,1]`: a gap `[0,q_1)` where
/// `x = 0`, then one segment per atom.
#[derive(Debug, Clone)]
pub struct StepProfile {
    atoms: Vec<f64>,
    cum: Vec<f64>,
    gaps: Vec<f64>,
    segs: Vec<Segment>,
}

impl StepProfile {
    /// Builds the profile for atoms `q_1<…<q_k<1` and cumulative weights `c`
    /// (with `c_k = 1`).
    pub fn new(atoms: &[f64], cum: &[f64]) -> Result<Self> {
        let k = atoms.len();
        if k == 0 || cum.len() != k {
            return Err(GlassError::invalid("measure", "atoms and cumulative weights must match"));
        }
        if !(atoms[k - 1] < 1.0) {
            return Err(GlassError::invalid("measure.atoms", "largest atom must be < 1"));
        }
        let mut gaps = Vec::with_capacity(k + 1);
        gaps.push(atoms[0]);
        for j in 1..k {
            gaps.push(atoms[j] - atoms[j - 1]);
        }
        gaps.push(1.0 - atoms[k - 1]);
        Self::from_gaps(&gaps, cum)
    }

    /// As [`new`](Self::new), from the `k+1` gaps `q_1, q_2-q_1, …, 1-q_k`;
    /// avoids forming `1 - q_k` by cancellation.
    pub fn from_gaps(gaps: &[f64], cum: &[f64]) -> Result<Self> {
        let k = cum.len();
        if gaps.len() != k + 1 || k == 0 {
            return Err(GlassError::invalid("measure", "need k+1 gaps for k atoms"));
        }
        if gaps.iter().any(|g| !(*g >= 0.0)) || !(gaps[k] > 0.0) {
            return Err(GlassError::invalid("measure", "gaps must be non-negative with a positive top gap"));
        }
        let mut atoms = Vec::with_capacity(k);
        let mut acc = 0.0;
        for g in &gaps[..k] {
            acc += g;
            atoms.push(acc);
        }
        let mut segs = Vec::with_capacity(k + 1);
        segs.push(Segment { start: 0.0, end: atoms[0], c: 0.0, xhat: 0.0, g: 0.0, int_g: 0.0 });
        for j in 0..k {
            let end = if j + 1 < k { atoms[j + 1] } else { 1.0 };
            let c = if j + 1 < k { cum[j] } else { 1.0 };
            segs.push(Segment { start: atoms[j], end, c, xhat: 0.0, g: 0.0, int_g: 0.0 });
        }
        let mut xhat = 0.0;
        for (s, len) in segs.iter_mut().zip(gaps).rev() {
            xhat += s.c * len;
            s.xhat = xhat;
        }
        if !(segs[0].xhat > 0.0) {
            return Err(GlassError::invalid("measure", "x̂ vanishes below the top atom"));
        }
        let (mut g, mut ig) = (0.0, 0.0);
        let last = segs.len() - 1;
        for (i, (s, &len)) in segs.iter_mut().zip(gaps).enumerate() {
            s.g = g;
            s.int_g = ig;
            if i < last {
                g = s.big_g_offset(len);
                ig = s.int_big_g_offset(len);
            }
        }
        Ok(StepProfile { atoms, cum: cum.to_vec(), gaps: gaps.to_vec(), segs })
    }

    pub fn from_measure(m: &ParisiMeasure) -> Result<Self> {
        Self::new(m.atoms(), &m.cumulative())
    }

    pub fn q_max(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    /// `1 - q_max`, exact when the profile was built from gaps.
    pub fn top_gap(&self) -> f64 {
        *self.gaps.last().unwrap()
    }

    fn segment(&self, q: f64) -> &Segment {
        // last segment whose start is <= q; the initial gap may be empty
        let mut idx = 0;
        for (i, s) in self.segs.iter().enumerate() {
            if s.start <= q && (s.end > s.start || i == 0) {
                idx = i;
            }
        }
        &self.segs[idx]
    }

    /// `x̂(q) = ∫_q^1 x`.
    pub fn xhat(&self, q: f64) -> f64 {
        self.segment(q).xhat_at(q)
    }

    /// `∫_0^{q_max} dq / x̂(q)`.
    pub fn inverse_xhat_integral(&self) -> f64 {
        self.segs[..self.segs.len() - 1].iter().zip(&self.gaps).map(|(s, &len)| s.inv_integral(len)).sum()
    }

    /// `∫_0^q ds / x̂(s)²` for `q < 1`.
    pub fn big_g(&self, q: f64) -> f64 {
        self.segment(q).big_g(q)
    }

    pub fn int_big_g(&self, q: f64) -> f64 {
        self.segment(q).int_big_g(q)
    }

    /// `∫_0^1 ν'(q) x(q) dq` in closed form.
    pub fn nu_prime_x_integral(&self, m: &Mixture) -> f64 {
        self.segs[1..].iter().map(|s| s.c * (m.value(s.end) - m.value(s.start))).sum()
    }
}

/// The Crisanti–Sommers value
/// `½[β² ∫ν'x + ∫_0^{q_max} dq/x̂ + log(1 - q_max)]`.
pub fn cs_functional(x: &ParisiMeasure, m: &Mixture, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(GlassError::invalid("beta", format!("must be positive, got {beta}")));
    }
    if x.q_max() >= 1.0 {
        return Err(GlassError::invalid("measure.atoms", "an atom at q = 1 makes the functional singular"));
    }
    let p = StepProfile::from_measure(x)?;
    Ok(value_of(&p, m, beta))
}

fn value_of(p: &StepProfile, m: &Mixture, beta: f64) -> f64 {
    0.5 * (beta * beta * p.nu_prime_x_integral(m) + p.inverse_xhat_integral() + p.top_gap().ln())
}

/// `F(q) = β²ν'(q) - ∫_0^q ds/x̂²` and `f(s) = ∫_0^s F`.
#[derive(Debug, Clone)]
pub struct FirstVariation<'a> {
    profile: StepProfile,
    mixture: &'a Mixture,
    beta: f64,
}

impl<'a> FirstVariation<'a> {
    pub fn new(x: &ParisiMeasure, mixture: &'a Mixture, beta: f64) -> Result<Self> {
        Ok(FirstVariation { profile: StepProfile::from_measure(x)?, mixture, beta })
    }

    pub fn from_profile(profile: StepProfile, mixture: &'a Mixture, beta: f64) -> Self {
        FirstVariation { profile, mixture, beta }
    }

    pub fn profile(&self) -> &StepProfile {
        &self.profile
    }

    pub fn big_f(&self, q: f64) -> f64 {
        self.beta * self.beta * self.mixture.eval(q, 1) - self.profile.big_g(q)
    }

    pub fn small_f(&self, q: f64) -> f64 {
        self.beta * self.beta * self.mixture.value(q) - self.profile.int_big_g(q)
    }

    pub fn value(&self) -> f64 {
        value_of(&self.profile, self.mixture, self.beta)
    }

    /// `(∂P/∂q_j, ∂P/∂c_j)`; the last cumulative weight is fixed at one and
    /// its entry is zero.
    pub fn gradient(&self) -> (Vec<f64>, Vec<f64>) {
        let atoms = &self.profile.atoms;
        let cum = &self.profile.cum;
        let k = atoms.len();
        let fs: Vec<f64> = atoms.iter().map(|&q| self.small_f(q)).collect();
        let dq = (0..k)
            .map(|j| {
                let w = if j == 0 { cum[0] } else { cum[j] - cum[j - 1] };
                -0.5 * w * self.big_f(atoms[j])
            })
            .collect();
        let dc = (0..k).map(|j| if j + 1 < k { 0.5 * (fs[j + 1] - fs[j]) } else { 0.0 }).collect();
        (dq, dc)
    }
}

/// Quantities of the `(b, x)` representation with `ξ = β²ν`:
/// `d(s) = ∫_s^1 ξ''x`, the boundary parameter `b` solving
/// `∫_0^1 ξ''/(b-d)² + ξ'(0)/(b-d(0))² = 1 - 1/b`, and
/// `Γ(q) = ξ'(0)/(b-d(0))² + ∫_0^q ξ''/(b-d)² - q`.
#[derive(Debug, Clone)]
pub struct BoundaryProblem {
    // (start, end, c, d(end)) per segment of x on [0,1]
    segs: Vec<(f64, f64, f64, f64)>,
    xi1: Vec<f64>,
    xi: Mixture,
    b: Option<f64>,
}

struct BoundaryEquation<'a>(&'a BoundaryProblem);

impl CostFunction for BoundaryEquation<'_> {
    type Param = f64;
    type Output = f64;
    fn cost(&self, b: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.0.residual(*b))
    }
}

impl BoundaryProblem {
    pub fn new(x: &ParisiMeasure, m: &Mixture, beta: f64) -> Result<Self> {
        let xi = m.scaled(beta * beta)?;
        let atoms = x.atoms();
        let cum = x.cumulative();
        let k = atoms.len();
        let mut segs = Vec::with_capacity(k + 1);
        segs.push((0.0, atoms[0], 0.0, 0.0));
        for j in 0..k {
            let end = if j + 1 < k { atoms[j + 1] } else { 1.0 };
            segs.push((atoms[j], end, cum[j], 0.0));
        }
        let mut d = 0.0;
        for s in segs.iter_mut().rev() {
            s.3 = d;
            d += s.2 * (xi.eval(s.1, 1) - xi.eval(s.0, 1));
        }
        let xi1 = segs.iter().map(|s| xi.eval(s.0, 1)).collect();
        let mut bp = BoundaryProblem { segs, xi1, xi, b: None };
        bp.b = bp.solve_b();
        Ok(bp)
    }

    fn d_at(&self, i: usize, q: f64) -> f64 {
        let (_, end, c, d_end) = self.segs[i];
        d_end + c * (self.xi.eval(end, 1) - self.xi.eval(q, 1))
    }

    pub fn d(&self, q: f64) -> f64 {
        let i = self.seg_index(q);
        self.d_at(i, q)
    }

    fn seg_index(&self, q: f64) -> usize {
        let mut idx = 0;
        for (i, s) in self.segs.iter().enumerate() {
            if s.0 <= q && (s.1 > s.0 || i == 0) {
                idx = i;
            }
        }
        idx
    }

    /// `∫_0^q ξ''/(b-d)²`, exact per segment.
    fn integral(&self, b: f64, q: f64) -> f64 {
        let mut acc = 0.0;
        for (i, s) in self.segs.iter().enumerate() {
            if s.0 >= q && !(i == 0 && q == 0.0) {
                break;
            }
            let hi = s.1.min(q);
            if hi <= s.0 {
                continue;
            }
            let lo_gap = b - self.d_at(i, s.0);
            let hi_gap = b - self.d_at(i, hi);
            acc += (self.xi.eval(hi, 1) - self.xi1[i]) / (lo_gap * hi_gap);
        }
        acc
    }

    fn boundary_term(&self, b: f64) -> f64 {
        let g = b - self.d_at(0, 0.0);
        self.xi.eval(0.0, 1) / (g * g)
    }

    fn residual(&self, b: f64) -> f64 {
        self.integral(b, 1.0) + self.boundary_term(b) - 1.0 + 1.0 / b
    }

    fn solve_b(&self) -> Option<f64> {
        let d0 = self.d_at(0, 0.0);
        let lo = d0 + 1e-12 * d0.max(1.0);
        if !(self.residual(lo) > 0.0) {
            return None;
        }
        let mut hi = (2.0 * d0).max(1.0) + 1.0;
        let mut tries = 0;
        while self.residual(hi) >= 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 200 {
                return None;
            }
        }
        let res = Executor::new(BoundaryEquation(self), BrentRoot::new(lo, hi, 1e-15))
            .configure(|s| s.max_iters(500))
            .run()
            .ok()?;
        res.state().get_best_param().copied()
    }

    pub fn b(&self) -> Option<f64> {
        self.b
    }

    /// `Γ(q)`; `None` when no `b` was bracketed.
    pub fn gamma(&self, q: f64) -> Option<f64> {
        let b = self.b?;
        Some(self.boundary_term(b) + self.integral(b, q) - q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_spin_value(beta: f64, q: f64) -> f64 {
        0.5 * (beta * beta * (1.0 - q * q) + q / (1.0 - q) + (1.0 - q).ln())
    }

    #[test]
    fn replica_symmetric_collapse() {
        let m = Mixture::new([(2, 0.5), (4, 0.5)]).unwrap();
        let rs = ParisiMeasure::dirac(0.0).unwrap();
        for beta in [0.1, 0.5, 1.3] {
            let v = cs_functional(&rs, &m, beta).unwrap();
            assert!((v - 0.5 * beta * beta).abs() < 1e-15);
        }
        assert!((cs_functional(&rs, &Mixture::pure(2), 0.5).unwrap() - 0.125).abs() < 1e-15);
        assert!(cs_functional(&rs, &m, 1e-8).unwrap().abs() < 1e-15);
        assert!(cs_functional(&ParisiMeasure::dirac(1.0).unwrap(), &m, 1.0).is_err());
    }

    #[test]
    fn single_atom_closed_form() {
        let m = Mixture::pure(2);
        for &(beta, q) in &[(1.0, 0.3), (2.0, 0.6), (0.4, 0.01)] {
            let v = cs_functional(&ParisiMeasure::dirac(q).unwrap(), &m, beta).unwrap();
            assert!((v - two_spin_value(beta, q)).abs() < 1e-14);
        }
    }

    // direct midpoint quadrature of the defining integrals
    fn brute_value(x: &ParisiMeasure, m: &Mixture, beta: f64) -> f64 {
        let n = 400_000;
        let qm = x.q_max();
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..n {
            let q = (i as f64 + 0.5) / n as f64;
            a += m.eval(q, 1) * x.x(q) / n as f64;
        }
        let xhat = |q: f64| {
            let k = 2000;
            (0..k).map(|i| x.x(q + (1.0 - q) * (i as f64 + 0.5) / k as f64)).sum::<f64>() * (1.0 - q) / k as f64
        };
        let nb = 4000;
        for i in 0..nb {
            let q = qm * (i as f64 + 0.5) / nb as f64;
            b += qm / nb as f64 / xhat(q);
        }
        0.5 * (beta * beta * a + b + (1.0 - qm).ln())
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let m = Mixture::new([(2, 0.3), (3, 0.5), (5, 0.2)]).unwrap();
        let x = ParisiMeasure::new(vec![0.0, 0.35, 0.7], vec![0.2, 0.3, 0.5]).unwrap();
        let v = cs_functional(&x, &m, 1.7).unwrap();
        assert!((v - brute_value(&x, &m, 1.7)).abs() < 1e-4);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = Mixture::new([(2, 0.4), (3, 0.6)]).unwrap();
        let beta = 1.9;
        let atoms = [0.05, 0.3, 0.62];
        let cum = [0.25, 0.55, 1.0];
        let fv = FirstVariation::from_profile(StepProfile::new(&atoms, &cum).unwrap(), &m, beta);
        let (dq, dc) = fv.gradient();
        let val = |a: &[f64], c: &[f64]| value_of(&StepProfile::new(a, c).unwrap(), &m, beta);
        let h = 1e-6;
        for j in 0..3 {
            let mut ap = atoms;
            let mut am = atoms;
            ap[j] += h;
            am[j] -= h;
            let fd = (val(&ap, &cum) - val(&am, &cum)) / (2.0 * h);
            assert!((fd - dq[j]).abs() < 1e-7, "q_{j}: {fd} vs {}", dq[j]);
        }
        for j in 0..2 {
            let mut cp = cum;
            let mut cm = cum;
            cp[j] += h;
            cm[j] -= h;
            let fd = (val(&atoms, &cp) - val(&atoms, &cm)) / (2.0 * h);
            assert!((fd - dc[j]).abs() < 1e-7, "c_{j}: {fd} vs {}", dc[j]);
        }
    }

    #[test]
    fn small_f_derivative_is_big_f() {
        let m = Mixture::new([(2, 0.5), (4, 0.5)]).unwrap();
        let x = ParisiMeasure::new(vec![0.1, 0.4, 0.8], vec![0.3, 0.3, 0.4]).unwrap();
        let fv = FirstVariation::new(&x, &m, 1.5).unwrap();
        for &q in &[0.05, 0.2, 0.5, 0.85, 0.95] {
            let h = 1e-6;
            let fd = (fv.small_f(q + h) - fv.small_f(q - h)) / (2.0 * h);
            assert!((fd - fv.big_f(q)).abs() < 1e-6, "q={q}");
        }
        assert!(fv.profile().xhat(0.99) > 0.0);
    }

    #[test]
    fn boundary_parameter_for_two_spin() {
        // RS at β = 0.5: b = 3/2; one atom at 1 - 1/(β√2) for β = 2: b = 2√2β
        let m = Mixture::pure(2);
        let rs = BoundaryProblem::new(&ParisiMeasure::dirac(0.0).unwrap(), &m, 0.5).unwrap();
        assert!((rs.b().unwrap() - 1.5).abs() < 1e-12);
        assert!(rs.gamma(0.0).unwrap().abs() < 1e-15);
        let beta = 2.0;
        let qp = 1.0 - 1.0 / (beta * 2f64.sqrt());
        let bp = BoundaryProblem::new(&ParisiMeasure::dirac(qp).unwrap(), &m, beta).unwrap();
        assert!((bp.b().unwrap() - 2.0 * 2f64.sqrt() * beta).abs() < 1e-10);
        assert!(bp.gamma(qp).unwrap().abs() < 1e-12);
        assert!((bp.d(0.1) - 2.0 * beta * beta * (1.0 - qp)).abs() < 1e-12);
    }
}
