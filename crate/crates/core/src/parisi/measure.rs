use serde::{Deserialize, Serialize};

use crate::error::{GlassError, Result};

/// A finitely supported probability measure on `[0,1]` with distribution
/// function `x(q) = μ([0,q])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct ParisiMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for ParisiMeasure {
    type Error = GlassError;
    fn try_from(r: RawMeasure) -> Result<Self> {
        ParisiMeasure::new(r.atoms, r.weights)
    }
}

impl From<ParisiMeasure> for RawMeasure {
    fn from(m: ParisiMeasure) -> Self {
        RawMeasure { atoms: m.atoms, weights: m.weights }
    }
}

pub const WEIGHT_SUM_TOL: f64 = 1e-12;

impl ParisiMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(GlassError::invalid("atoms", "at least one atom required"));
        }
        if atoms.len() != weights.len() {
            return Err(GlassError::invalid("weights", "one weight per atom"));
        }
        for (i, &a) in atoms.iter().enumerate() {
            if !(0.0..=1.0).contains(&a) {
                return Err(GlassError::invalid(format!("atoms.{i}"), format!("must lie in [0,1], got {a}")));
            }
            if i > 0 && a <= atoms[i - 1] {
                return Err(GlassError::invalid(format!("atoms.{i}"), "atoms must be strictly increasing"));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(GlassError::invalid(format!("weights.{i}"), format!("must be positive, got {w}")));
            }
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(GlassError::invalid("weights", format!("must sum to 1, got {s}")));
        }
        Ok(ParisiMeasure { atoms, weights })
    }

    /// Like [`new`](Self::new) but rescales the weights to sum to one.
    pub fn normalized(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return Err(GlassError::invalid("weights", "total mass must be positive"));
        }
        Self::new(atoms, weights.into_iter().map(|w| w / s).collect())
    }

    /// `δ_q`.
    pub fn dirac(q: f64) -> Result<Self> {
        Self::new(vec![q], vec![1.0])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Largest atom.
    pub fn q_max(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    /// `c_j = w_1 + … + w_j`, with the last entry forced to exactly one.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut c: Vec<f64> = self
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        *c.last_mut().unwrap() = 1.0;
        c
    }

    /// Right-continuous distribution function.
    pub fn x(&self, q: f64) -> f64 {
        if q >= self.q_max() {
            return 1.0;
        }
        self.atoms.iter().zip(&self.weights).take_while(|(a, _)| **a <= q).map(|(_, w)| w).sum()
    }

    /// Pointwise blend `λ x_other + (1-λ) x_self` of distribution functions.
    pub fn blend(&self, other: &ParisiMeasure, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(GlassError::invalid("lambda", "must lie in [0,1]"));
        }
        let mut pts: Vec<f64> = self.atoms.iter().chain(&other.atoms).copied().collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        let mut prev = 0.0;
        for &q in &pts {
            let v = lambda * other.x(q) + (1.0 - lambda) * self.x(q);
            if v - prev > 0.0 {
                atoms.push(q);
                weights.push(v - prev);
            }
            prev = v;
        }
        Self::normalized(atoms, weights)
    }

    /// Drops atoms lighter than `weight_tol` and fuses atoms closer than
    /// `atom_tol` (weight-averaged position).
    pub fn merged(&self, atom_tol: f64, weight_tol: f64) -> Self {
        let mut atoms: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            if w < weight_tol {
                continue;
            }
            match (atoms.last_mut(), weights.last_mut()) {
                (Some(pa), Some(pw)) if a - *pa < atom_tol => {
                    // an atom pinned at zero keeps its position
                    if *pa != 0.0 {
                        *pa = (*pa * *pw + a * w) / (*pw + w);
                    }
                    *pw += w;
                }
                _ => {
                    atoms.push(a);
                    weights.push(w);
                }
            }
        }
        if atoms.is_empty() {
            let i = self.weights.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
            return ParisiMeasure { atoms: vec![self.atoms[i]], weights: vec![1.0] };
        }
        Self::normalized(atoms, weights).expect("merging preserves validity")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ParisiMeasure::new(vec![0.1, 0.1], vec![0.5, 0.5]).is_err());
        assert!(ParisiMeasure::new(vec![0.1, 0.2], vec![0.5, 0.4]).is_err());
        assert!(ParisiMeasure::new(vec![0.1], vec![1.0]).is_ok());
    }

    #[test]
    fn distribution_function() {
        let m = ParisiMeasure::new(vec![0.0, 0.5], vec![0.3, 0.7]).unwrap();
        assert_eq!(m.x(0.0), 0.3);
        assert_eq!(m.x(0.49), 0.3);
        assert_eq!(m.x(0.5), 1.0);
        assert_eq!(m.cumulative(), vec![0.3, 1.0]);
    }

    #[test]
    fn json_shape() {
        let m = ParisiMeasure::new(vec![0.0, 0.5], vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"atoms":[0.0,0.5],"weights":[0.25,0.75]}"#);
        let back: ParisiMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ParisiMeasure>(r#"{"atoms":[0.5],"weights":[0.5]}"#).is_err());
    }

    #[test]
    fn blend_and_merge() {
        let a = ParisiMeasure::dirac(0.0).unwrap();
        let b = ParisiMeasure::dirac(0.4).unwrap();
        let c = a.blend(&b, 0.25).unwrap();
        assert_eq!(c.atoms(), &[0.0, 0.4]);
        assert!((c.weights()[0] - 0.75).abs() < 1e-15);
        let d = ParisiMeasure::new(vec![0.0, 0.3, 0.3 + 1e-10, 0.8], vec![0.2, 0.3, 0.3, 0.2]).unwrap();
        let e = d.merged(1e-8, 1e-10);
        assert_eq!(e.len(), 3);
        let f = ParisiMeasure::new(vec![0.0, 0.5], vec![1e-12, 1.0 - 1e-12]).unwrap().merged(1e-8, 1e-10);
        assert_eq!(f.atoms(), &[0.5]);
    }
}
