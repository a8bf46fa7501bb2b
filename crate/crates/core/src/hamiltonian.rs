//! Gaussian Hamiltonians `H_N(σ) = Σ_p γ_p N^{-(p-1)/2} Σ J^{(p)}_{i1..ip} σ_{i1}…σ_{ip}`
//! stored as full, non-symmetrised `N^p` coefficient arrays.
//!
//! Coefficients for degree `p` are drawn from the generator stream
//! `(seed, Tensor, p)` the first time they are needed, so a disorder is a pure
//! function of `(mixture, N, seed, generator id)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GlassError, Result};
use crate::geometry::Configuration;
use crate::mixture::Mixture;
use crate::rng::{self, Purpose, GENERATOR_ID};
use crate::tensor::{self, Packed};

/// Default memory budget for dense coefficients: 1 GiB.
pub const DEFAULT_BUDGET_BYTES: u128 = 1 << 30;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Source {
    Seeded,
    Explicit,
}

#[derive(Debug)]
pub struct Disorder {
    mixture: Mixture,
    dim: usize,
    seed: u64,
    source: Source,
    // indexed by degree
    tensors: Vec<OnceLock<Vec<f64>>>,
    packed: Vec<OnceLock<Packed>>,
}

/// Persistence header; the coefficients themselves are regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderHeader {
    pub mixture: Mixture,
    pub dim: usize,
    pub seed: u64,
    pub generator_id: String,
    pub format_version: u32,
}

fn tensor_bytes(dim: usize, p: u32) -> u128 {
    (dim as u128).pow(p) * 8
}

fn check_budget(m: &Mixture, dim: usize, budget: u128) -> Result<()> {
    let mut total: u128 = 0;
    for (p, _) in m.terms() {
        total = total.saturating_add(tensor_bytes(dim, p));
        if total > budget {
            return Err(GlassError::Capacity { degree: p, dim, bytes: tensor_bytes(dim, p), budget });
        }
    }
    Ok(())
}

fn empty_slots<T>(len: usize) -> Vec<OnceLock<T>> {
    (0..len).map(|_| OnceLock::new()).collect()
}

impl Disorder {
    /// A seeded disorder with the default 1 GiB budget.
    pub fn sample(m: &Mixture, dim: usize, seed: u64) -> Result<Self> {
        Self::sample_with_budget(m, dim, seed, DEFAULT_BUDGET_BYTES)
    }

    pub fn sample_with_budget(m: &Mixture, dim: usize, seed: u64, budget_bytes: u128) -> Result<Self> {
        if dim < 2 {
            return Err(GlassError::invalid("dim", format!("must be at least 2, got {dim}")));
        }
        check_budget(m, dim, budget_bytes)?;
        let slots = m.max_degree() as usize + 1;
        Ok(Disorder {
            mixture: m.clone(),
            dim,
            seed,
            source: Source::Seeded,
            tensors: empty_slots(slots),
            packed: empty_slots(slots),
        })
    }

    /// Disorder with caller-supplied coefficient arrays; degrees of the
    /// mixture missing from `tensors` are zero.
    pub fn from_tensors(m: &Mixture, dim: usize, tensors: Vec<(u32, Vec<f64>)>) -> Result<Self> {
        if dim < 2 {
            return Err(GlassError::invalid("dim", format!("must be at least 2, got {dim}")));
        }
        check_budget(m, dim, DEFAULT_BUDGET_BYTES)?;
        let slots = m.max_degree() as usize + 1;
        let d = Disorder {
            mixture: m.clone(),
            dim,
            seed: 0,
            source: Source::Explicit,
            tensors: empty_slots(slots),
            packed: empty_slots(slots),
        };
        for (p, t) in tensors {
            if m.coeff(p) == 0.0 {
                return Err(GlassError::invalid(format!("tensors.{p}"), "degree not present in the mixture"));
            }
            let want = dim.pow(p);
            if t.len() != want {
                return Err(GlassError::DimensionMismatch { expected: want, got: t.len() });
            }
            let _ = d.tensors[p as usize].set(t);
        }
        for (p, _) in m.terms() {
            let _ = d.tensors[p as usize].set(vec![0.0; dim.pow(p)]);
        }
        Ok(d)
    }

    /// All coefficients zero.
    pub fn zeros(m: &Mixture, dim: usize) -> Result<Self> {
        Self::from_tensors(m, dim, Vec::new())
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_seeded(&self) -> bool {
        self.source == Source::Seeded
    }

    /// Coefficients `J^{(p)}` in row-major order, generated on first use.
    pub fn tensor(&self, p: u32) -> &[f64] {
        assert!(self.mixture.coeff(p) > 0.0, "degree {p} not in mixture");
        self.tensors[p as usize].get_or_init(|| {
            let mut rng = rng::stream(self.seed, Purpose::Tensor, p as u64);
            (0..self.dim.pow(p)).map(|_| rng.sample(StandardNormal)).collect()
        })
    }

    fn packed(&self, p: u32) -> &Packed {
        self.packed[p as usize].get_or_init(|| Packed::from_dense(self.tensor(p), self.dim, p))
    }

    pub fn materialize(&self) {
        for (p, _) in self.mixture.terms() {
            self.packed(p);
        }
    }

    pub fn is_materialized(&self, p: u32) -> bool {
        self.tensors.get(p as usize).is_some_and(|t| t.get().is_some())
    }

    fn scale(&self, p: u32, g2: f64) -> f64 {
        g2.sqrt() * (self.dim as f64).powf(-0.5 * (p as f64 - 1.0))
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(GlassError::DimensionMismatch { expected: self.dim, got: len });
        }
        Ok(())
    }

    pub fn energy(&self, sigma: &Configuration) -> Result<f64> {
        self.check(sigma.dim())?;
        Ok(self.energy_raw(sigma.coords()))
    }

    /// Energy of raw coordinates; the length must equal `dim`.
    pub fn energy_raw(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        self.mixture.terms().map(|(p, g2)| self.scale(p, g2) * self.packed(p).eval(x)).sum()
    }

    /// Per-degree contributions `(p, γ_p N^{-(p-1)/2} Σ J σ…σ)`.
    pub fn term_energies(&self, sigma: &Configuration) -> Result<Vec<(u32, f64)>> {
        self.check(sigma.dim())?;
        Ok(self.mixture.terms().map(|(p, g2)| (p, self.scale(p, g2) * self.packed(p).eval(sigma.coords()))).collect())
    }

    /// Energy by full dense contraction (the packed form's reference).
    pub fn energy_dense(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        self.mixture
            .terms()
            .map(|(p, g2)| self.scale(p, g2) * tensor::contract_full(self.tensor(p), self.dim, p, x))
            .sum()
    }

    pub fn gradient(&self, sigma: &Configuration) -> Result<Vec<f64>> {
        self.check(sigma.dim())?;
        Ok(self.gradient_raw(sigma.coords()))
    }

    pub fn gradient_raw(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut g = vec![0.0; self.dim];
        for (p, g2) in self.mixture.terms() {
            tensor::add_gradient(self.tensor(p), self.dim, p, x, self.scale(p, g2), &mut g);
        }
        g
    }

    /// `E H(σ)` for `σ` uniform on the outer sphere, by Wick pairing:
    /// odd degrees vanish and degree `2K` picks up the paired traces of `J`
    /// times `N^K / (N(N+2)…(N+2K-2))`.
    pub fn uniform_mean_energy(&self) -> f64 {
        let n = self.dim;
        let mut total = 0.0;
        for (p, g2) in self.mixture.terms() {
            if p % 2 == 1 {
                continue;
            }
            let k = p / 2;
            let t = self.tensor(p);
            let strides: Vec<usize> = (0..p).map(|s| n.pow(p - 1 - s)).collect();
            let mut traces = 0.0;
            for m in tensor::matchings(p as usize) {
                // each pair shares one index; sum over the N^K assignments
                let pair_stride: Vec<usize> = m.iter().map(|&(a, b)| strides[a] + strides[b]).collect();
                let mut idx = vec![0usize; k as usize];
                loop {
                    let off: usize = idx.iter().zip(&pair_stride).map(|(i, s)| i * s).sum();
                    traces += t[off];
                    let mut j = 0;
                    while j < idx.len() {
                        idx[j] += 1;
                        if idx[j] < n {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                    if j == idx.len() {
                        break;
                    }
                }
            }
            let nf = n as f64;
            let moment = (0..k).fold(1.0, |acc, j| acc * nf / (nf + 2.0 * j as f64));
            total += self.scale(p, g2) * moment * traces;
        }
        total
    }

    pub fn header(&self) -> Result<DisorderHeader> {
        if !self.is_seeded() {
            return Err(GlassError::invalid("disorder", "explicit coefficients cannot be regenerated from a header"));
        }
        Ok(DisorderHeader {
            mixture: self.mixture.clone(),
            dim: self.dim,
            seed: self.seed,
            generator_id: GENERATOR_ID.to_string(),
            format_version: FORMAT_VERSION,
        })
    }

    pub fn save_header(&self, path: &Path) -> Result<()> {
        let f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(f, &self.header()?)?;
        Ok(())
    }

    pub fn from_header(h: &DisorderHeader) -> Result<Self> {
        if h.generator_id != GENERATOR_ID {
            return Err(GlassError::invalid(
                "generator_id",
                format!("file was written with `{}`, this build provides `{GENERATOR_ID}`", h.generator_id),
            ));
        }
        if h.format_version != FORMAT_VERSION {
            return Err(GlassError::invalid("format_version", format!("unsupported version {}", h.format_version)));
        }
        Self::sample(&h.mixture, h.dim, h.seed)
    }

    pub fn load_header(path: &Path) -> Result<Self> {
        let h: DisorderHeader = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Self::from_header(&h)
    }

    /// Raw dump: for each degree of the mixture in increasing order, `N^p`
    /// little-endian f64 values, row-major.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (p, _) in self.mixture.terms() {
            for v in self.tensor(p) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_raw(m: &Mixture, dim: usize, path: &Path) -> Result<Self> {
        check_budget(m, dim, DEFAULT_BUDGET_BYTES)?;
        let mut r = BufReader::new(File::open(path)?);
        let mut tensors = Vec::new();
        let mut buf = [0u8; 8];
        for (p, _) in m.terms() {
            let len = dim.pow(p);
            let mut t = Vec::with_capacity(len);
            for _ in 0..len {
                r.read_exact(&mut buf)?;
                t.push(f64::from_le_bytes(buf));
            }
            tensors.push((p, t));
        }
        if r.read(&mut buf)? != 0 {
            return Err(GlassError::invalid("raw", "trailing bytes after the last tensor"));
        }
        Self::from_tensors(m, dim, tensors)
    }
}

/// `N ν(⟨σ,σ'⟩/N)`.
pub fn theoretical_covariance(m: &Mixture, a: &Configuration, b: &Configuration) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(GlassError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let n = a.dim() as f64;
    Ok(n * m.value(a.dot(b) / n))
}

/// The Hamiltonian seen on the cross-section through a centre `σ₀ ∈ S^{N-1}(q)`,
/// as a polynomial in `σ̄ ∈ R^{N-1}` (with `‖σ̄‖² = N` on the section):
/// `H(θ(σ̄)) = h0 + H^{σ₀}(σ̄)` where `θ(σ̄) = U(√(1-q) σ̄, √(Nq))`.
#[derive(Debug, Clone)]
pub struct SectionHamiltonian {
    outer_dim: usize,
    q: f64,
    mixture: Mixture,
    // (k, folded coefficients over (N-1)^k)
    terms: Vec<(u32, Vec<f64>)>,
    // Householder vector of the frame change; None for the canonical centre
    reflector: Option<Vec<f64>>,
}

impl SectionHamiltonian {
    pub fn dim(&self) -> usize {
        self.outer_dim - 1
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The mixture `ν_q` governing this section's law.
    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.terms.iter().map(|(k, _)| *k).collect()
    }

    pub fn energy_raw(&self, xbar: &[f64]) -> f64 {
        assert_eq!(xbar.len(), self.dim());
        self.terms.iter().map(|(k, t)| tensor::contract_full(t, self.dim(), *k, xbar)).sum()
    }

    pub fn gradient_raw(&self, xbar: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for (k, t) in &self.terms {
            tensor::add_gradient(t, self.dim(), *k, xbar, 1.0, &mut g);
        }
        g
    }

    /// `θ(σ̄)`: the point of the outer space corresponding to `σ̄`.
    pub fn embed(&self, xbar: &[f64]) -> Vec<f64> {
        assert_eq!(xbar.len(), self.dim());
        let n = self.outer_dim as f64;
        let s = (1.0 - self.q).sqrt();
        let mut out: Vec<f64> = xbar.iter().map(|x| s * x).collect();
        out.push((n * self.q).sqrt());
        if let Some(v) = &self.reflector {
            reflect(v, &mut out);
        }
        out
    }
}

fn reflect(v: &[f64], x: &mut [f64]) {
    let c = 2.0 * tensor::dot(v, x);
    x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= c * vi);
}

/// Applies `I - 2vvᵀ` along every mode of a row-major `N^p` array.
fn reflect_all_modes(t: &mut [f64], n: usize, p: u32, v: &[f64]) {
    for mode in 0..p {
        let inner = n.pow(p - 1 - mode);
        let outer = t.len() / (inner * n);
        let mut acc = vec![0.0; inner];
        for o in 0..outer {
            let base = o * n * inner;
            acc.iter_mut().for_each(|a| *a = 0.0);
            for i in 0..n {
                let row = &t[base + i * inner..base + (i + 1) * inner];
                acc.iter_mut().zip(row).for_each(|(a, r)| *a += v[i] * r);
            }
            for i in 0..n {
                let row = &mut t[base + i * inner..base + (i + 1) * inner];
                let c = 2.0 * v[i];
                row.iter_mut().zip(&acc).for_each(|(r, a)| *r -= c * a);
            }
        }
    }
}

fn regroup(tensors: &[(u32, f64, &[f64])], n: usize, q: f64, mixture: &Mixture) -> (f64, Vec<(u32, Vec<f64>)>) {
    let nbar = n - 1;
    let last = n - 1;
    let nf = n as f64;
    let pmax = tensors.iter().map(|(p, _, _)| *p).max().unwrap_or(0);
    let mut out: Vec<Vec<f64>> = (0..=pmax).map(|k| vec![0.0; nbar.pow(k)]).collect();
    let mut h0 = 0.0;
    for &(p, g2, t) in tensors {
        let gamma = g2.sqrt();
        // coefficient for the k non-last slots: γ_p q^{(p-k)/2} (1-q)^{k/2} N^{-(k-1)/2}
        let coef: Vec<f64> = (0..=p)
            .map(|k| {
                gamma * q.powf(0.5 * (p - k) as f64) * (1.0 - q).powf(0.5 * k as f64) * nf.powf(-0.5 * (k as f64 - 1.0))
            })
            .collect();
        let mut idx = vec![0usize; p as usize];
        for (flat, &v) in t.iter().enumerate() {
            let mut f = flat;
            for slot in (0..p as usize).rev() {
                idx[slot] = f % n;
                f /= n;
            }
            let mut k = 0;
            let mut sub = 0usize;
            for &i in &idx {
                if i != last {
                    k += 1;
                    sub = sub * nbar + i;
                }
            }
            if k == 0 {
                h0 += coef[0] * v;
            } else {
                out[k][sub] += coef[k] * v;
            }
        }
    }
    let present: Vec<u32> = mixture.terms().map(|(k, _)| k).collect();
    let terms = out
        .into_iter()
        .enumerate()
        .skip(1)
        .filter(|(k, _)| present.contains(&(*k as u32)))
        .map(|(k, t)| (k as u32, t))
        .collect();
    (h0, terms)
}

/// Decomposes `H` around the canonical centre `σ₀ = (0,…,0,√(Nq))`.
/// Returns `h0 = H(σ₀)` and the section Hamiltonian.
pub fn restrict_to_section(d: &Disorder, q: f64) -> Result<(f64, SectionHamiltonian)> {
    let mixture = d.mixture().restrict(q)?;
    let n = d.dim();
    let parts: Vec<(u32, f64, &[f64])> = d.mixture().terms().map(|(p, g2)| (p, g2, d.tensor(p))).collect();
    let (h0, terms) = regroup(&parts, n, q, &mixture);
    Ok((h0, SectionHamiltonian { outer_dim: n, q, mixture, terms, reflector: None }))
}

/// As [`restrict_to_section`] for an arbitrary centre, after a Householder
/// change of frame taking `σ₀` to the last axis.
pub fn restrict_to_section_at(d: &Disorder, center: &Configuration) -> Result<(f64, SectionHamiltonian)> {
    if center.dim() != d.dim() {
        return Err(GlassError::DimensionMismatch { expected: d.dim(), got: center.dim() });
    }
    let q = center.radius_sq();
    let mixture = d.mixture().restrict(q)?;
    let n = d.dim();
    let norm = center.norm();
    let mut v: Vec<f64> = center.coords().iter().map(|x| x / norm).collect();
    v[n - 1] -= 1.0;
    let vn = tensor::dot(&v, &v).sqrt();
    if vn < 1e-14 {
        return restrict_to_section(d, q);
    }
    v.iter_mut().for_each(|x| *x /= vn);
    let rotated: Vec<(u32, f64, Vec<f64>)> = d
        .mixture()
        .terms()
        .map(|(p, g2)| {
            let mut t = d.tensor(p).to_vec();
            reflect_all_modes(&mut t, n, p, &v);
            (p, g2, t)
        })
        .collect();
    let parts: Vec<(u32, f64, &[f64])> = rotated.iter().map(|(p, g, t)| (*p, *g, t.as_slice())).collect();
    let (h0, terms) = regroup(&parts, n, q, &mixture);
    Ok((h0, SectionHamiltonian { outer_dim: n, q, mixture, terms, reflector: Some(v) }))
}
