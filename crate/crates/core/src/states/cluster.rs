//! Single-linkage pure-state clustering.

use serde::{Deserialize, Serialize};

use super::{overlap_matrix, OverlapMatrix};
use crate::error::{GlassError, Result};
use crate::geometry::{dot, Configuration};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDecomposition {
    /// Indices into the clustered set, largest cluster first.
    pub clusters: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    /// Mean of each cluster rescaled to `S^{N-1}(q⋆)`; `None` if the mean vanishes.
    pub centers: Vec<Option<Configuration>>,
    pub q_star: f64,
    pub eps: f64,
    /// Fraction of pairs where "same cluster" and `|R − q⋆| < ε` disagree.
    pub pair_violation: f64,
}

impl StateDecomposition {
    pub fn undefined_centers(&self) -> Vec<usize> {
        self.centers.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(k, _)| k).collect()
    }

    /// Cluster label of every point.
    pub fn labels(&self, len: usize) -> Vec<usize> {
        let mut l = vec![usize::MAX; len];
        for (k, c) in self.clusters.iter().enumerate() {
            for &i in c {
                l[i] = k;
            }
        }
        l
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of `{(i,j): R_ij > threshold}`, largest first, ties
/// by smallest member.
pub(super) fn components(m: &OverlapMatrix, threshold: f64) -> Vec<Vec<usize>> {
    let n = m.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if m.get(i, j) > threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

/// Mean of `members` rescaled to radius `√(N q)`, or `None` if the mean is 0.
pub(super) fn rescaled_mean(points: &[&[f64]], q: f64) -> Option<Configuration> {
    let n = points[0].len();
    let mut mean = vec![0.0; n];
    for p in points {
        mean.iter_mut().zip(p.iter()).for_each(|(m, x)| *m += x);
    }
    let norm = dot(&mean, &mean).sqrt();
    let scale = points.iter().map(|p| dot(p, p).sqrt()).fold(0.0, f64::max);
    if norm <= 1e-12 * scale * points.len() as f64 {
        return None;
    }
    Configuration::on_sphere(mean, q).ok()
}

pub fn cluster_states(points: &[Configuration], q_star: f64, eps: f64) -> Result<StateDecomposition> {
    if points.is_empty() {
        return Err(GlassError::invalid("points", "empty set"));
    }
    if !(q_star > 0.0 && q_star <= 1.0) {
        return Err(GlassError::invalid("q_star", format!("must lie in (0,1], got {q_star}")));
    }
    if !(eps > 0.0 && eps < q_star) {
        return Err(GlassError::invalid("eps", format!("must lie in (0, q_star), got {eps}")));
    }
    let m = overlap_matrix(points)?;
    let clusters = components(&m, q_star - eps);
    let total = points.len() as f64;
    let weights = clusters.iter().map(|c| c.len() as f64 / total).collect();
    let centers = clusters
        .iter()
        .map(|c| {
            let members: Vec<&[f64]> = c.iter().map(|&i| points[i].coords()).collect();
            rescaled_mean(&members, q_star)
        })
        .collect();
    let mut label = vec![0; points.len()];
    for (k, c) in clusters.iter().enumerate() {
        for &i in c {
            label[i] = k;
        }
    }
    let (mut bad, mut pairs) = (0u64, 0u64);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            pairs += 1;
            let same = label[i] == label[j];
            let near = (m.get(i, j) - q_star).abs() < eps;
            bad += (same != near) as u64;
        }
    }
    let pair_violation = if pairs == 0 { 0.0 } else { bad as f64 / pairs as f64 };
    Ok(StateDecomposition { clusters, weights, centers, q_star, eps, pair_violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::states::planted;

    #[test]
    fn planted_two_clusters() {
        let q = 0.6;
        let p = planted::two_clusters(128, 400, q, 0.05, 7).unwrap();
        let dec = cluster_states(&p.points, q, 0.2).unwrap();
        assert_eq!(dec.clusters.len(), 2);
        assert_eq!(dec.weights, vec![0.5, 0.5]);
        for center in dec.centers.iter().map(|c| c.as_ref().unwrap()) {
            assert!(center.is_on_sphere(q, 1e-8));
            let sign = center.dot(&p.center).signum();
            let dist: f64 =
                center.coords().iter().zip(p.center.coords()).map(|(a, b)| (a - sign * b).powi(2)).sum::<f64>().sqrt()
                    / 128f64.sqrt();
            assert!(dist < 1e-2, "{dist}");
        }
    }

    #[test]
    fn identical_points() {
        let x = Configuration::canonical(10, 1.0).unwrap();
        let dec = cluster_states(&vec![x; 5], 0.9, 0.1).unwrap();
        assert_eq!(dec.clusters, vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(dec.weights, vec![1.0]);
        assert!(dec.centers[0].as_ref().unwrap().is_on_sphere(0.9, 1e-12));
    }

    #[test]
    fn uniform_points_are_singletons() {
        let mut rng = stream(3, Purpose::Uniform, 0);
        let pts: Vec<_> = (0..60).map(|_| Configuration::uniform(128, 1.0, &mut rng).unwrap()).collect();
        let dec = cluster_states(&pts, 0.5, 0.1).unwrap();
        assert_eq!(dec.clusters.len(), 60);
        assert!(dec.clusters.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn reclustering_is_idempotent() {
        let p = planted::two_clusters(64, 30, 0.5, 0.2, 1).unwrap();
        let dec = cluster_states(&p.points, 0.9, 0.3).unwrap();
        for c in &dec.clusters {
            let sub: Vec<Configuration> = c.iter().map(|&i| p.points[i].clone()).collect();
            let again = cluster_states(&sub, 0.9, 0.3).unwrap();
            assert_eq!(again.clusters, vec![(0..c.len()).collect::<Vec<_>>()]);
        }
    }

    #[test]
    fn opposite_points_have_no_center() {
        let x = Configuration::canonical(4, 1.0).unwrap();
        let dec = cluster_states(&[x.clone(), x.negated()], 0.5, 0.4).unwrap();
        assert_eq!(dec.clusters.len(), 2);
        let m = OverlapMatrix::from_entries(2, vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        assert_eq!(components(&m, -2.0), vec![vec![0, 1]]);
        let both = [x.coords(), x.negated().coords()].map(|c| c.to_vec());
        let refs: Vec<&[f64]> = both.iter().map(|v| v.as_slice()).collect();
        assert!(rescaled_mean(&refs, 0.5).is_none());
    }
}
