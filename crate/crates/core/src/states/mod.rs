//! Overlap analytics on sets of configurations: overlap arrays and their
//! histograms, pure-state clustering, ultrametric trees of state centres,
//! ultrametricity and Ghirlanda-Guerra defects, overlap supports.
//!
//! Overlaps here are normalized, `R(σ,σ') = ⟨σ,σ'⟩/(‖σ‖‖σ'‖)`, except for the
//! configuration-set supports which use `⟨σ,σ'⟩/N`.

mod cluster;
mod gg;
pub mod planted;
mod support;
mod ultra;

use serde::{Deserialize, Serialize};

use crate::error::{GlassError, Result};
use crate::exec::Execution;
use crate::geometry::{dot, Configuration};

pub use cluster::{cluster_states, StateDecomposition};
pub use gg::{gg_defect, GgDefect, GgOptions, GgSign, Psi, TestFn};
pub use support::{overlap_support, set_overlaps, GibbsRule, SupportOptions, SupportReport, SupportRow};
pub use ultra::{
    build_ultratree, triple_violates, ultrametricity_defect, ultrametricity_defect_with, write_defect_csv, CenterRule,
    DefectRow, OrthogonalityRecord, TreeLevel, TreeOptions, UltraOptions, UltraTree,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    n: usize,
    data: Vec<f64>,
}

impl OverlapMatrix {
    /// Validates symmetry (to 1e-12), range and unit diagonal.
    pub fn from_entries(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(GlassError::DimensionMismatch { expected: n * n, got: data.len() });
        }
        for i in 0..n {
            if (data[i * n + i] - 1.0).abs() > 1e-12 {
                return Err(GlassError::invalid("overlaps", format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > 1e-12 {
                    return Err(GlassError::invalid("overlaps", format!("asymmetric at ({i},{j})")));
                }
                if !(-1.0..=1.0).contains(&a) {
                    return Err(GlassError::invalid("overlaps", format!("entry ({i},{j}) = {a} outside [-1,1]")));
                }
            }
        }
        Ok(OverlapMatrix { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Entries above the diagonal, row by row.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                v.push(self.get(i, j));
            }
        }
        v
    }

    /// The array restricted to `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> OverlapMatrix {
        let data = idx.iter().flat_map(|&i| idx.iter().map(move |&j| (i, j))).map(|(i, j)| self.get(i, j)).collect();
        OverlapMatrix { n: idx.len(), data }
    }
}

/// The overlap array of raw vectors.
pub fn overlap_matrix_raw(points: &[Vec<f64>], exec: Execution) -> Result<OverlapMatrix> {
    if points.is_empty() {
        return Err(GlassError::invalid("points", "empty set"));
    }
    let dim = points[0].len();
    let mut norms = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(GlassError::DimensionMismatch { expected: dim, got: p.len() });
        }
        let n = dot(p, p).sqrt();
        if n == 0.0 {
            return Err(GlassError::invalid("points", format!("point {i} has zero norm")));
        }
        norms.push(n);
    }
    let n = points.len();
    let rows = exec.map_range(n, |i| {
        (0..n)
            .map(|j| if i == j { 1.0 } else { (dot(&points[i], &points[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0) })
            .collect::<Vec<f64>>()
    });
    let mut data: Vec<f64> = rows.into_iter().flatten().collect();
    // exact symmetry regardless of summation order
    for i in 0..n {
        for j in 0..i {
            data[i * n + j] = data[j * n + i];
        }
    }
    Ok(OverlapMatrix { n, data })
}

pub fn overlap_matrix(points: &[Configuration]) -> Result<OverlapMatrix> {
    let raw: Vec<Vec<f64>> = points.iter().map(|p| p.coords().to_vec()).collect();
    overlap_matrix_raw(&raw, Execution::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges spanning `[-1, 1]`.
    pub edges: Vec<f64>,
    /// Probability mass per bin.
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn bin_of(&self, r: f64) -> usize {
        let bins = self.mass.len();
        (((r + 1.0) / 2.0 * bins as f64).floor() as usize).min(bins - 1)
    }

    /// Mass of the bins meeting `(lo, hi)`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        (0..self.mass.len()).filter(|&b| self.edges[b + 1] > lo && self.edges[b] < hi).map(|b| self.mass[b]).sum()
    }
}

/// Off-diagonal overlaps binned on `[-1, 1]` and normalized to unit mass.
pub fn overlap_histogram(m: &OverlapMatrix, bins: usize) -> Result<Histogram> {
    if m.len() < 2 {
        return Err(GlassError::invalid("overlaps", "need at least two points"));
    }
    if bins == 0 {
        return Err(GlassError::invalid("bins", "need at least one bin"));
    }
    let edges: Vec<f64> = (0..=bins).map(|b| -1.0 + 2.0 * b as f64 / bins as f64).collect();
    let mut h = Histogram { edges, mass: vec![0.0; bins] };
    let off = m.off_diagonal();
    let w = 1.0 / off.len() as f64;
    for r in off {
        let b = h.bin_of(r);
        h.mass[b] += w;
    }
    Ok(h)
}
