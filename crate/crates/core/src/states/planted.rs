//! Synthetic configuration sets with known overlap structure.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{GlassError, Result};
use crate::geometry::{dot, Configuration};
use crate::rng::{stream, Purpose, Rng};

/// `count` orthonormal vectors of `R^dim` (Gram-Schmidt on Gaussians).
pub fn orthonormal(dim: usize, count: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    if count > dim {
        return Err(GlassError::invalid("count", format!("{count} orthonormal vectors do not fit in dimension {dim}")));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        // two passes keep the basis orthogonal to rounding
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&g, b);
                g.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&g, &g).sqrt();
        if n > 1e-8 {
            g.iter_mut().for_each(|x| *x /= n);
            basis.push(g);
        }
    }
    Ok(basis)
}

fn combine(parts: &[(f64, &[f64])], dim: usize) -> Vec<f64> {
    let s = (dim as f64).sqrt();
    let mut v = vec![0.0; dim];
    for (w, e) in parts {
        v.iter_mut().zip(e.iter()).for_each(|(x, y)| *x += s * w * y);
    }
    v
}

pub struct TwoClusters {
    pub center: Configuration,
    pub points: Vec<Configuration>,
    /// `+1` or `-1` per point.
    pub signs: Vec<f64>,
}

/// Points `±σ_c + noise·√N·u` with `σ_c ∈ S^{N-1}(q)` and `u` a unit vector
/// orthogonal to `σ_c`; signs alternate.
pub fn two_clusters(dim: usize, count: usize, q: f64, noise: f64, seed: u64) -> Result<TwoClusters> {
    if q + noise * noise > 1.0 {
        return Err(GlassError::invalid("noise", "points would leave the unit ball"));
    }
    let mut rng = stream(seed, Purpose::Planted, 0);
    let center = Configuration::uniform(dim, q, &mut rng)?;
    let unit: Vec<f64> = center.coords().iter().map(|x| x / center.norm()).collect();
    let mut points = Vec::with_capacity(count);
    let mut signs = Vec::with_capacity(count);
    for i in 0..count {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let u = crate::geometry::random_orthogonal_direction(&unit, &mut rng);
        let x = combine(&[(noise, &u)], dim);
        let p: Vec<f64> = center.coords().iter().zip(&x).map(|(c, e)| sign * c + e).collect();
        points.push(Configuration::new(p)?);
        signs.push(sign);
    }
    Ok(TwoClusters { center, points, signs })
}

/// A two-level tree with exactly orthogonal increments: `supers` on
/// `S^{N-1}(q1)`, `leaves` on `S^{N-1}(q_star)` below them, and samples on
/// the outer sphere below the leaves. Overlaps `⟨·,·⟩/N` are `q_star`
/// inside a leaf, `q1` inside a super-cluster and 0 across.
pub struct PlantedTree {
    pub q1: f64,
    pub q_star: f64,
    pub supers: Vec<Configuration>,
    pub leaves: Vec<Configuration>,
    pub leaf_parent: Vec<usize>,
    pub samples: Vec<Configuration>,
    pub sample_leaf: Vec<usize>,
}

pub fn hierarchy(
    dim: usize,
    q1: f64,
    q_star: f64,
    supers: usize,
    leaves_per_super: usize,
    samples_per_leaf: usize,
    seed: u64,
) -> Result<PlantedTree> {
    if !(0.0 < q1 && q1 < q_star && q_star < 1.0) {
        return Err(GlassError::invalid("levels", "need 0 < q1 < q_star < 1"));
    }
    let n_leaves = supers * leaves_per_super;
    let total = supers + n_leaves + n_leaves * samples_per_leaf;
    let mut rng = stream(seed, Purpose::Planted, 1);
    let e = orthonormal(dim, total, &mut rng)?;
    let mut next = 0;
    let mut take = || {
        next += 1;
        &e[next - 1]
    };
    let mut out = PlantedTree {
        q1,
        q_star,
        supers: Vec::new(),
        leaves: Vec::new(),
        leaf_parent: Vec::new(),
        samples: Vec::new(),
        sample_leaf: Vec::new(),
    };
    for s in 0..supers {
        let es = take().clone();
        out.supers.push(Configuration::new(combine(&[(q1.sqrt(), &es)], dim))?);
        for _ in 0..leaves_per_super {
            let el = take().clone();
            let leaf = [(q1.sqrt(), es.as_slice()), ((q_star - q1).sqrt(), el.as_slice())];
            out.leaves.push(Configuration::new(combine(&leaf, dim))?);
            out.leaf_parent.push(s);
            let leaf_id = out.leaves.len() - 1;
            for _ in 0..samples_per_leaf {
                let ex = take();
                let p = [leaf[0], leaf[1], ((1.0 - q_star).sqrt(), ex.as_slice())];
                out.samples.push(Configuration::new(combine(&p, dim))?);
                out.sample_leaf.push(leaf_id);
            }
        }
    }
    Ok(out)
}

/// Two groups of `count/2` outer-sphere points with overlap `q` inside a
/// group and 0 across, so the pair overlaps are supported on `{0, q}`.
pub fn two_level_support(dim: usize, count: usize, q: f64, seed: u64) -> Result<Vec<Configuration>> {
    let mut rng = stream(seed, Purpose::Planted, 2);
    let e = orthonormal(dim, 2 + 2 * (count / 2), &mut rng)?;
    let mut pts = Vec::with_capacity(count);
    for i in 0..2 * (count / 2) {
        let g = i % 2;
        let p = combine(&[(q.sqrt(), &e[g]), ((1.0 - q).sqrt(), &e[2 + i])], dim);
        pts.push(Configuration::new(p)?);
    }
    Ok(pts)
}

/// Replicas where the second is a near copy of the first (overlap ≈ `r`)
/// and the rest are independent uniform points: not exchangeable.
pub fn non_exchangeable(dim: usize, replicas: usize, r: f64, seed: u64) -> Result<Vec<Configuration>> {
    if replicas < 2 {
        return Err(GlassError::invalid("replicas", "need at least two"));
    }
    let mut rng = stream(seed, Purpose::Planted, 3);
    let first = Configuration::uniform(dim, 1.0, &mut rng)?;
    let unit: Vec<f64> = first.coords().iter().map(|x| x / first.norm()).collect();
    let u = crate::geometry::random_orthogonal_direction(&unit, &mut rng);
    let second: Vec<f64> = combine(&[(r, &unit), ((1.0 - r * r).sqrt(), &u)], dim);
    let mut out = vec![first, Configuration::new(second)?];
    for _ in 2..replicas {
        out.push(Configuration::uniform(dim, 1.0, &mut rng)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_overlaps_are_exact() {
        let t = hierarchy(64, 0.3, 0.7, 2, 2, 3, 1).unwrap();
        let n = 64.0;
        let ov = |a: &Configuration, b: &Configuration| a.dot(b) / n;
        for (i, a) in t.samples.iter().enumerate() {
            assert!(a.is_on_sphere(1.0, 1e-12));
            for (j, b) in t.samples.iter().enumerate().skip(i + 1) {
                let (li, lj) = (t.sample_leaf[i], t.sample_leaf[j]);
                let want = if li == lj {
                    0.7
                } else if t.leaf_parent[li] == t.leaf_parent[lj] {
                    0.3
                } else {
                    0.0
                };
                assert!((ov(a, b) - want).abs() < 1e-12);
            }
        }
        assert!(t.leaves.iter().all(|l| l.is_on_sphere(0.7, 1e-12)));
        assert!(hierarchy(8, 0.3, 0.7, 2, 2, 3, 1).is_err());
    }

    #[test]
    fn support_points() {
        let p = two_level_support(64, 10, 0.6, 0).unwrap();
        assert_eq!(p.len(), 10);
        assert!((p[0].dot(&p[2]) / 64.0 - 0.6).abs() < 1e-12);
        assert!((p[0].dot(&p[1]) / 64.0).abs() < 1e-12);
    }
}
