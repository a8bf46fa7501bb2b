//! Points of the ball, spheres `S^{N-1}(q)` of radius `√(Nq)`, overlaps, and
//! bands around centres on inner spheres.
//!
//! For `σ` uniform on the outer sphere, the projection
//! `t = ⟨σ/√N, σ₀/‖σ₀‖⟩` has density proportional to `(1-t²)^{(N-3)/2}` on
//! `[-1, 1]`. Band volumes and band sampling are both built on this marginal.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{GlassError, Result};
use crate::quad;
use crate::rng::{self, Purpose};

/// Tolerance on `‖σ‖²/N` for sphere membership checks.
pub const SPHERE_TOL: f64 = 1e-8;

/// A point `σ ∈ R^N` with `0 < ‖σ‖²/N ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    coords: Vec<f64>,
}

impl Configuration {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(GlassError::invalid("coords", "dimension must be at least 2"));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(GlassError::invalid("coords", "non-finite coordinate"));
        }
        let c = Configuration { coords };
        let r = c.radius_sq();
        if r == 0.0 {
            return Err(GlassError::invalid("coords", "zero vector"));
        }
        if r > 1.0 + SPHERE_TOL {
            return Err(GlassError::invalid("coords", format!("outside the unit ball: |σ|²/N = {r}")));
        }
        Ok(c)
    }

    /// Rescales `coords` onto `S^{N-1}(q)`.
    pub fn on_sphere(mut coords: Vec<f64>, q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(GlassError::invalid("q", format!("radius must lie in (0,1], got {q}")));
        }
        let n = coords.len() as f64;
        let norm = dot(&coords, &coords).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(GlassError::invalid("coords", "cannot rescale a zero or non-finite vector"));
        }
        let s = (n * q).sqrt() / norm;
        coords.iter_mut().for_each(|x| *x *= s);
        Self::new(coords)
    }

    /// Uniform point on `S^{N-1}(q)`.
    pub fn uniform(dim: usize, q: f64, rng: &mut rng::Rng) -> Result<Self> {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        Self::on_sphere(g, q)
    }

    /// `(0, …, 0, √(Nq))`.
    pub fn canonical(dim: usize, q: f64) -> Result<Self> {
        let mut c = vec![0.0; dim];
        c[dim - 1] = 1.0;
        Self::on_sphere(c, q)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        dot(&self.coords, &self.coords).sqrt()
    }

    /// `‖σ‖²/N`; equals `q` on `S^{N-1}(q)`.
    pub fn radius_sq(&self) -> f64 {
        dot(&self.coords, &self.coords) / self.coords.len() as f64
    }

    pub fn dot(&self, other: &Configuration) -> f64 {
        dot(&self.coords, &other.coords)
    }

    pub fn is_on_sphere(&self, q: f64, tol: f64) -> bool {
        (self.radius_sq() - q).abs() <= tol
    }

    /// Same direction, moved to `S^{N-1}(q)`.
    pub fn rescaled(&self, q: f64) -> Result<Self> {
        Self::on_sphere(self.coords.clone(), q)
    }

    pub fn negated(&self) -> Self {
        Configuration { coords: self.coords.iter().map(|x| -x).collect() }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(a: &Configuration, b: &Configuration) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(GlassError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

/// `R(σ,σ') = ⟨σ,σ'⟩/(‖σ‖‖σ'‖)`.
pub fn overlap(a: &Configuration, b: &Configuration) -> Result<f64> {
    check_dims(a, b)?;
    Ok(overlap_raw(a.coords(), b.coords()))
}

/// Overlap of raw vectors; callers guarantee non-zero norms.
pub fn overlap_raw(a: &[f64], b: &[f64]) -> f64 {
    let r = dot(a, b) / (dot(a, a) * dot(b, b)).sqrt();
    r.clamp(-1.0, 1.0)
}

/// Default band width `δ_N = N^{-1/4}`.
pub fn default_band_width(dim: usize) -> f64 {
    (dim as f64).powf(-0.25)
}

/// A band `{σ ∈ S^{N-1}: |⟨σ/√N, σ₀/‖σ₀‖⟩ − ‖σ₀‖/√N| ≤ δ}` around a centre
/// `σ₀ ∈ S^{N-1}(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    center: Configuration,
    width: f64,
}

impl BandSpec {
    pub fn new(center: Configuration, width: f64) -> Result<Self> {
        let q = center.radius_sq();
        if !(q > 0.0 && q < 1.0 - SPHERE_TOL) {
            return Err(GlassError::invalid("band.center", format!("centre radius q must lie in (0,1), got {q}")));
        }
        if !(width > 0.0 && width <= 1.0) {
            return Err(GlassError::invalid("band.width", format!("must lie in (0,1], got {width}")));
        }
        Ok(BandSpec { center, width })
    }

    pub fn with_default_width(center: Configuration) -> Result<Self> {
        let w = default_band_width(center.dim());
        Self::new(center, w)
    }

    pub fn center(&self) -> &Configuration {
        &self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn q(&self) -> f64 {
        self.center.radius_sq()
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn unit_center(&self) -> Vec<f64> {
        let n = self.center.norm();
        self.center.coords().iter().map(|x| x / n).collect()
    }

    /// `t = ⟨σ/√N, σ₀/‖σ₀‖⟩` for raw coordinates.
    pub fn projection(&self, sigma: &[f64]) -> f64 {
        let n = sigma.len() as f64;
        dot(sigma, self.center.coords()) / (n.sqrt() * self.center.norm())
    }

    /// Admissible range of `t`, clamped to `[-1, 1]`.
    pub fn interval(&self) -> (f64, f64) {
        let s = self.q().sqrt();
        ((s - self.width).max(-1.0), (s + self.width).min(1.0))
    }

    /// Predicate on raw coordinates already known to lie on the outer sphere.
    pub fn contains_raw(&self, sigma: &[f64]) -> bool {
        (self.projection(sigma) - self.q().sqrt()).abs() <= self.width
    }
}

/// Band membership of a point of the outer sphere.
pub fn in_band(sigma: &Configuration, band: &BandSpec) -> Result<bool> {
    check_dims(sigma, band.center())?;
    if !sigma.is_on_sphere(1.0, SPHERE_TOL) {
        return Err(GlassError::invalid("sigma", format!("not on the outer sphere: |σ|²/N = {}", sigma.radius_sq())));
    }
    Ok(band.contains_raw(sigma.coords()))
}

/// `|⟨σ/√N, σ₀/‖σ₀‖⟩ − ‖σ₀‖/√N|`; zero exactly on the cross-section through `σ₀`.
pub fn section_residual(sigma: &[f64], center: &[f64]) -> f64 {
    let n = sigma.len() as f64;
    let cn = dot(center, center).sqrt();
    (dot(sigma, center) / (n.sqrt() * cn) - cn / n.sqrt()).abs()
}

/// Unnormalised log-density of `t` under the uniform measure on `S^{N-1}`.
pub fn log_marginal_density(t: f64, dim: usize) -> f64 {
    let e = 0.5 * (dim as f64 - 3.0);
    if e == 0.0 {
        return 0.0;
    }
    let u = 1.0 - t * t;
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    e * u.ln()
}

/// `log ∫_{-1}^{1} (1-t²)^{(N-3)/2} dt = log B(1/2, (N-1)/2)`.
pub fn log_marginal_normalizer(dim: usize) -> f64 {
    ln_beta(0.5, 0.5 * (dim as f64 - 1.0))
}

/// `log P(t ∈ [lo, hi])` for `t` the projection of a uniform point.
pub fn log_marginal_mass(lo: f64, hi: f64, dim: usize) -> Result<f64> {
    let (lo, hi) = (lo.max(-1.0), hi.min(1.0));
    if !(hi > lo) {
        return Err(GlassError::invalid("band", "empty interval after clamping to [-1,1]"));
    }
    if lo <= -1.0 && hi >= 1.0 {
        return Ok(0.0);
    }
    // shift by the maximum of the (concave) log-density on the interval
    let peak = if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else if lo > 0.0 {
        lo
    } else {
        hi
    };
    let shift = log_marginal_density(peak, dim);
    let q = quad::integrate(|t| (log_marginal_density(t, dim) - shift).exp(), lo, hi, 1e-300, 1e-12, 4000);
    if !(q.value > 0.0) {
        return Err(GlassError::Numerical("band quadrature returned a non-positive mass".into()));
    }
    Ok(q.value.ln() + shift - log_marginal_normalizer(dim))
}

/// `(1/N)·log Vol(Band)` under the normalised Haar measure, for a centre on
/// `S^{N-1}(q)` and half-width `δ`.
pub fn band_log_volume(q: f64, width: f64, dim: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(GlassError::invalid("q", format!("must lie in (0,1), got {q}")));
    }
    if !(width > 0.0) {
        return Err(GlassError::invalid("width", "must be positive"));
    }
    if dim < 3 {
        return Err(GlassError::invalid("dim", "band volumes need N >= 3"));
    }
    let s = q.sqrt();
    Ok(log_marginal_mass(s - width, s + width, dim)? / dim as f64)
}

/// Tabulated inverse-CDF sampler for `t` restricted to a band interval. The
/// log-density is interpolated linearly between nodes and each cell is sampled
/// exactly from its exponential piece.
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    nodes: Vec<f64>,
    logd: Vec<f64>,
    cum: Vec<f64>,
}

const SAMPLER_NODES: usize = 4096;

impl MarginalSampler {
    pub fn new(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        let (lo, hi) = (lo.max(-1.0), hi.min(1.0));
        if !(hi > lo) {
            return Err(GlassError::invalid("band", "empty interval after clamping to [-1,1]"));
        }
        // stay off the endpoints ±1, where the log-density is -∞
        let eps = 1e-12;
        let (lo, hi) = (lo.max(-1.0 + eps), hi.min(1.0 - eps));
        let m = SAMPLER_NODES;
        let nodes: Vec<f64> = (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
        let raw: Vec<f64> = nodes.iter().map(|&t| log_marginal_density(t, dim)).collect();
        let top = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let logd: Vec<f64> = raw.iter().map(|v| v - top).collect();
        let mut cum = Vec::with_capacity(m + 1);
        cum.push(0.0);
        for i in 0..m {
            let h = nodes[i + 1] - nodes[i];
            let mass = cell_mass(logd[i], logd[i + 1], h);
            cum.push(cum[i] + mass);
        }
        Ok(MarginalSampler { nodes, logd, cum })
    }

    pub fn sample(&self, rng: &mut rng::Rng) -> f64 {
        let total = *self.cum.last().unwrap();
        let u: f64 = rng.gen::<f64>() * total;
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&u)) {
            Ok(i) => i.min(self.nodes.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.nodes.len() - 2),
        };
        let (a, b) = (self.logd[i], self.logd[i + 1]);
        let h = self.nodes[i + 1] - self.nodes[i];
        let v: f64 = rng.gen();
        let slope = (b - a) / h;
        let x = if slope.abs() * h < 1e-9 {
            v * h
        } else {
            // invert ∫_0^x e^{slope·s} ds / ∫_0^h e^{slope·s} ds = v
            (1.0 + v * ((slope * h).exp_m1())).ln() / slope
        };
        (self.nodes[i] + x.clamp(0.0, h)).clamp(-1.0, 1.0)
    }

    /// Mean of the tabulated (piecewise-exponential) density.
    pub fn mean(&self) -> f64 {
        let total = *self.cum.last().unwrap();
        let mut acc = 0.0;
        for i in 0..self.nodes.len() - 1 {
            let mid = 0.5 * (self.nodes[i] + self.nodes[i + 1]);
            acc += mid * (self.cum[i + 1] - self.cum[i]);
        }
        acc / total
    }
}

fn cell_mass(a: f64, b: f64, h: f64) -> f64 {
    let d = b - a;
    if d.abs() < 1e-9 {
        h * (0.5 * (a + b)).exp()
    } else {
        h * (b.exp() - a.exp()) / d
    }
}

/// Uniform sampler on a band of the outer sphere.
#[derive(Debug, Clone)]
pub struct BandSampler {
    band: BandSpec,
    unit: Vec<f64>,
    marginal: MarginalSampler,
}

impl BandSampler {
    pub fn new(band: &BandSpec) -> Result<Self> {
        let (lo, hi) = band.interval();
        Ok(BandSampler {
            unit: band.unit_center(),
            marginal: MarginalSampler::new(lo, hi, band.dim())?,
            band: band.clone(),
        })
    }

    pub fn band(&self) -> &BandSpec {
        &self.band
    }

    pub fn sample(&self, rng: &mut rng::Rng) -> Vec<f64> {
        let n = self.unit.len();
        let t = self.marginal.sample(rng);
        let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let proj = dot(&g, &self.unit);
        g.iter_mut().zip(&self.unit).for_each(|(x, u)| *x -= proj * u);
        let gn = dot(&g, &g).sqrt();
        let radial = (1.0 - t * t).max(0.0).sqrt();
        let s = (n as f64).sqrt();
        let mut out: Vec<f64> = g.iter().zip(&self.unit).map(|(x, u)| s * (t * u + radial * x / gn)).collect();
        // exact renormalisation onto the outer sphere
        let r = dot(&out, &out).sqrt();
        out.iter_mut().for_each(|x| *x *= s / r);
        out
    }

    pub fn marginal_mean(&self) -> f64 {
        self.marginal.mean()
    }
}

/// `count` i.i.d. uniform points of the band.
pub fn sample_uniform_band(band: &BandSpec, seed: u64, count: usize) -> Result<Vec<Configuration>> {
    let sampler = BandSampler::new(band)?;
    let mut rng = rng::stream(seed, Purpose::Uniform, 0);
    (0..count).map(|_| Configuration::new(sampler.sample(&mut rng))).collect()
}

/// Uniform unit-norm direction orthogonal to `unit`.
pub fn random_orthogonal_direction(unit: &[f64], rng: &mut rng::Rng) -> Vec<f64> {
    let mut g: Vec<f64> = (0..unit.len()).map(|_| rng.sample(StandardNormal)).collect();
    let proj = dot(&g, unit);
    g.iter_mut().zip(unit).for_each(|(x, u)| *x -= proj * u);
    let n = dot(&g, &g).sqrt();
    g.iter_mut().for_each(|x| *x /= n);
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(dim: usize, i: usize, q: f64) -> Configuration {
        let mut c = vec![0.0; dim];
        c[i] = 1.0;
        Configuration::on_sphere(c, q).unwrap()
    }

    #[test]
    fn overlap_examples() {
        let mut rng = rng::stream(1, Purpose::Uniform, 0);
        let s = Configuration::uniform(16, 1.0, &mut rng).unwrap();
        assert!((overlap(&s, &s).unwrap() - 1.0).abs() < 1e-15);
        assert!((overlap(&s, &s.negated()).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(overlap(&axis(4, 0, 1.0), &axis(4, 1, 1.0)).unwrap(), 0.0);
        assert!(Configuration::new(vec![0.0; 4]).is_err());
    }

    #[test]
    fn in_band_examples() {
        let n = 64;
        let q: f64 = 0.25;
        let center = axis(n, 0, q);
        let ray = center.rescaled(1.0).unwrap();
        // t = 1 along the centre's own ray: inside iff δ ≥ 1 - √q
        let inside = BandSpec::new(center.clone(), 0.5).unwrap();
        let outside = BandSpec::new(center.clone(), 0.4).unwrap();
        assert!(in_band(&ray, &inside).unwrap());
        assert!(!in_band(&ray, &outside).unwrap());
        // orthogonal point: |0 - 0.5| ≤ 0.4 is false
        assert!(!in_band(&axis(n, 1, 1.0), &outside).unwrap());
        // δ = 1 admits every t ≥ √q - 1; uniform points essentially never fall below
        let full = BandSpec::new(center, 1.0).unwrap();
        let mut rng = rng::stream(3, Purpose::Uniform, 0);
        for _ in 0..200 {
            let s = Configuration::uniform(n, 1.0, &mut rng).unwrap();
            assert!(in_band(&s, &full).unwrap());
        }
        let inner = axis(n, 1, 0.5);
        assert!(in_band(&inner, &full).is_err());
    }

    #[test]
    fn band_volume_whole_sphere_is_zero() {
        assert_eq!(band_log_volume(0.5, 1.9, 100).unwrap(), 0.0);
        // N = 3: t is uniform on [-1,1] (Archimedes)
        let v = band_log_volume(0.25, 0.25, 3).unwrap();
        assert!((v - (0.25f64).ln() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn band_volume_matches_direct_quadrature() {
        // independent route: plain composite Simpson in linear space at small N
        let (q, w, n) = (0.3f64, 0.2, 20usize);
        let (lo, hi) = (q.sqrt() - w, q.sqrt() + w);
        let m = 20000;
        let h = (hi - lo) / m as f64;
        let f = |t: f64| (1.0 - t * t).powf((n as f64 - 3.0) / 2.0);
        let mut s = f(lo) + f(hi);
        for i in 1..m {
            s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let num = s * h / 3.0;
        let total = {
            let h = 2.0 / m as f64;
            let mut s = f(-1.0) + f(1.0);
            for i in 1..m {
                s += f(-1.0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let expected = (num / total).ln() / n as f64;
        assert!((band_log_volume(q, w, n).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn band_volume_complement_sums_to_one() {
        for &(q, w, n) in &[(0.5f64, 0.01f64, 1000usize), (0.2, 0.3, 50), (0.8, 0.05, 10_000)] {
            let s: f64 = q.sqrt();
            let band = log_marginal_mass(s - w, s + w, n).unwrap();
            let below = log_marginal_mass(-1.0, s - w, n).unwrap();
            let above = log_marginal_mass(s + w, 1.0, n).unwrap();
            let m = band.max(below).max(above);
            let total = m + ((band - m).exp() + (below - m).exp() + (above - m).exp()).ln();
            assert!(total.abs() < 1e-10, "{total}");
        }
    }

    #[test]
    fn band_volume_tends_to_fixed_width_limit() {
        // at fixed δ the limit is ½log(1-(√q-δ)²), the volume of the edge nearest the equator
        let (q, w) = (0.5f64, 0.01);
        let limit = 0.5 * (1.0 - (q.sqrt() - w).powi(2)).ln();
        let errs: Vec<f64> =
            [1_000usize, 10_000, 100_000].iter().map(|&n| (band_log_volume(q, w, n).unwrap() - limit).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 1e-4);
    }

    #[test]
    fn band_samples_stay_in_band_and_match_marginal_mean() {
        let n = 64;
        let center = Configuration::canonical(n, 0.5).unwrap();
        let band = BandSpec::new(center, 0.1).unwrap();
        let pts = sample_uniform_band(&band, 11, 4000).unwrap();
        let ts: Vec<f64> = pts.iter().map(|p| band.projection(p.coords())).collect();
        assert!(pts.iter().all(|p| in_band(p, &band).unwrap()));
        // oracle: truncated-density mean by quadrature
        let (lo, hi) = band.interval();
        let w = |t: f64| (log_marginal_density(t, n)).exp();
        let z = quad::integrate(w, lo, hi, 1e-300, 1e-13, 500).value;
        let m1 = quad::integrate(|t| t * w(t), lo, hi, 1e-300, 1e-13, 500).value / z;
        let m2 = quad::integrate(|t| t * t * w(t), lo, hi, 1e-300, 1e-13, 500).value / z;
        let se = ((m2 - m1 * m1) / ts.len() as f64).sqrt();
        let mean = ts.iter().sum::<f64>() / ts.len() as f64;
        assert!((mean - m1).abs() < 5.0 * se, "mean {mean} vs {m1} (se {se})");

        let other = sample_uniform_band(&band, 12, 4000).unwrap();
        assert_ne!(other[0], pts[0]);
        let mean2 = other.iter().map(|p| band.projection(p.coords())).sum::<f64>() / 4000.0;
        assert!((mean2 - mean).abs() < 5.0 * se * 2f64.sqrt());
    }
}
