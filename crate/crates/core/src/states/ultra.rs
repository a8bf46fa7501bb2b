//! Ultrametricity defects and ultrametric trees of pure-state centres.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::cluster::{components, rescaled_mean};
use super::{OverlapMatrix, StateDecomposition};
use crate::error::{GlassError, Result};
use crate::exec::Execution;
use crate::geometry::{dot, section_residual, BandSpec, Configuration};
use crate::rng::{stream, Purpose};

/// `R₁₃ < min(R₁₂, R₂₃) − ε` for one labelled triple.
pub fn triple_violates(r12: f64, r23: f64, r13: f64, eps: f64) -> bool {
    r13 < r12.min(r23) - eps
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct UltraOptions {
    /// Largest array enumerated exhaustively.
    pub exact_max: usize,
    /// Triples drawn above `exact_max`.
    pub triples: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for UltraOptions {
    fn default() -> Self {
        UltraOptions { exact_max: 200, triples: 1_000_000, seed: 0, execution: Execution::default() }
    }
}

/// Fraction of ordered triples of distinct replicas violating the
/// ultrametric inequality by more than `eps`.
pub fn ultrametricity_defect(m: &OverlapMatrix, eps: f64) -> Result<f64> {
    ultrametricity_defect_with(m, eps, &UltraOptions::default())
}

pub fn ultrametricity_defect_with(m: &OverlapMatrix, eps: f64, opts: &UltraOptions) -> Result<f64> {
    let n = m.len();
    if n < 3 {
        return Err(GlassError::invalid("overlaps", "need at least three replicas"));
    }
    let bad = |i: usize, j: usize, k: usize| triple_violates(m.get(i, j), m.get(j, k), m.get(i, k), eps) as u64;
    if n <= opts.exact_max {
        let counts = opts.execution.map_range(n, |i| {
            let mut c = 0u64;
            for j in (0..n).filter(|&j| j != i) {
                for k in (0..n).filter(|&k| k != i && k != j) {
                    c += bad(i, j, k);
                }
            }
            c
        });
        let total = (n * (n - 1) * (n - 2)) as f64;
        return Ok(counts.iter().sum::<u64>() as f64 / total);
    }
    const CHUNKS: usize = 64;
    let per = opts.triples.div_ceil(CHUNKS);
    let counts = opts.execution.map_range(CHUNKS, |c| {
        let mut rng = stream(opts.seed, Purpose::Subset, c as u64);
        let mut hits = 0u64;
        for _ in 0..per {
            let i = rng.gen_range(0..n);
            let j = loop {
                let j = rng.gen_range(0..n);
                if j != i {
                    break j;
                }
            };
            let k = loop {
                let k = rng.gen_range(0..n);
                if k != i && k != j {
                    break k;
                }
            };
            hits += bad(i, j, k);
        }
        hits
    });
    Ok(counts.iter().sum::<u64>() as f64 / (per * CHUNKS) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectRow {
    pub kind: String,
    pub parameter: f64,
    pub value: f64,
    pub std_error: f64,
}

pub fn write_defect_csv<W: Write>(rows: &[DefectRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// How the centre `σ_q` of a class of state centres is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterRule {
    /// The point of `S^{N-1}(q)` whose sections contain every member exactly
    /// (`⟨σ_k, σ_q⟩ = Nq`): the minimum-norm solution in the span of the
    /// members, completed to radius `√(Nq)` along a fresh direction
    /// orthogonal to all centres. Falls back to rescaling when the
    /// minimum-norm solution is already longer than `√(Nq)`.
    #[default]
    Section,
    /// Mean of the members rescaled to `S^{N-1}(q)`.
    RescaledMean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeOptions {
    /// Fixed `θ` for every level; data-driven when `None`.
    pub theta: Option<f64>,
    pub center_rule: CenterRule,
    /// Band width around state centres for the mass-nesting check.
    pub band_delta: f64,
    /// Band width around class centres for the mass-nesting check.
    pub class_delta: f64,
    pub seed: u64,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions { theta: None, center_rule: CenterRule::Section, band_delta: 0.05, class_delta: 0.1, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeLevel {
    pub q: f64,
    pub theta: f64,
    /// Leaf indices per class, largest class first.
    pub classes: Vec<Vec<usize>>,
    pub centers: Vec<Configuration>,
    /// Class of the level below (the root for the first level).
    pub parents: Vec<usize>,
    /// Pairs joined by the closure without a direct edge.
    pub non_transitive: usize,
    /// Largest section residual of members and child centres.
    pub section_residual: f64,
    /// Classes whose centre needed a fresh orthogonal direction.
    pub lifted: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrthogonalityRecord {
    pub q: f64,
    pub class: usize,
    pub q1: f64,
    pub class1: usize,
    pub q2: f64,
    pub class2: usize,
    /// `|⟨σ₁ − σ_q, σ₂ − σ_q⟩|/N`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UltraTree {
    pub q_star: f64,
    /// Cluster index (in the decomposition) of every leaf.
    pub leaf_clusters: Vec<usize>,
    pub leaves: Vec<Configuration>,
    pub levels: Vec<TreeLevel>,
    pub nesting_ok: bool,
    pub orthogonality: Vec<OrthogonalityRecord>,
    pub max_orthogonality: f64,
    /// Largest `G(Band(σ⋆ₖ, δ) ∖ Band(σ_q, δ'))` over leaves and levels.
    pub mass_nesting: Option<f64>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn classes_at(r: &OverlapMatrix, threshold: f64) -> (Vec<Vec<usize>>, usize) {
    let classes = components(r, threshold);
    let mut non_transitive = 0;
    for c in &classes {
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                non_transitive += (r.get(i, j) <= threshold) as usize;
            }
        }
    }
    (classes, non_transitive)
}

struct Lifter {
    basis: Vec<Vec<f64>>,
    rng: crate::rng::Rng,
}

impl Lifter {
    fn push(&mut self, v: &[f64]) {
        let mut g = v.to_vec();
        for _ in 0..2 {
            for b in &self.basis {
                let c = dot(&g, b);
                g.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&g, &g).sqrt();
        if n > 1e-10 * dot(v, v).sqrt().max(1e-300) {
            g.iter_mut().for_each(|x| *x /= n);
            self.basis.push(g);
        }
    }

    fn fresh(&mut self, dim: usize) -> Result<Vec<f64>> {
        if self.basis.len() >= dim {
            return Err(GlassError::Numerical("no direction left orthogonal to all centres".into()));
        }
        loop {
            let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut self.rng)).collect();
            let before = self.basis.len();
            self.push(&g);
            if self.basis.len() > before {
                return Ok(self.basis[before].clone());
            }
        }
    }
}

// centre of a class on S^{N-1}(q); second value: whether it was lifted
fn section_center(members: &[&[f64]], q: f64, lifter: &mut Lifter) -> Result<(Configuration, bool)> {
    let dim = members[0].len();
    let k = members.len();
    let target = dim as f64 * q;
    let g = DMatrix::from_fn(k, k, |i, j| dot(members[i], members[j]));
    let rhs = DVector::from_element(k, target);
    let tol = 1e-12 * g.amax().max(1e-300);
    let a = g.pseudo_inverse(tol).map_err(|e| GlassError::Numerical(e.to_string()))? * rhs;
    let mut x = vec![0.0; dim];
    for (c, m) in a.iter().zip(members) {
        x.iter_mut().zip(m.iter()).for_each(|(xi, mi)| *xi += c * mi);
    }
    let r2 = dot(&x, &x);
    if r2 < target * (1.0 - 1e-12) {
        let w = lifter.fresh(dim)?;
        let s = (target - r2).sqrt();
        x.iter_mut().zip(&w).for_each(|(xi, wi)| *xi += s * wi);
        Ok((Configuration::on_sphere(x, q)?, true))
    } else {
        Ok((Configuration::on_sphere(x, q)?, false))
    }
}

/// Nested equivalence classes of the state centres at each overlap level of
/// `levels` (strictly increasing in `(0, q⋆)`), with class centres, nesting,
/// section and orthogonality diagnostics. `samples` (the points the
/// decomposition was computed from, on the outer sphere) enable the
/// mass-nesting check.
pub fn build_ultratree(
    dec: &StateDecomposition,
    levels: &[f64],
    opts: &TreeOptions,
    samples: Option<&[Configuration]>,
) -> Result<UltraTree> {
    let q_star = dec.q_star;
    let (leaf_clusters, leaves): (Vec<usize>, Vec<Configuration>) =
        dec.centers.iter().enumerate().filter_map(|(k, c)| c.clone().map(|c| (k, c))).unzip();
    if leaves.is_empty() {
        return Err(GlassError::invalid("decomposition", "no defined state centre"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) || levels.iter().any(|&q| !(q > 0.0 && q < q_star)) {
        return Err(GlassError::invalid("levels", "must be strictly increasing inside (0, q_star)"));
    }
    let dim = leaves[0].dim();
    let raw: Vec<Vec<f64>> = leaves.iter().map(|c| c.coords().to_vec()).collect();
    let r = super::overlap_matrix_raw(&raw, Execution::Sequential)?;
    let mut lifter = Lifter { basis: Vec::new(), rng: stream(opts.seed, Purpose::Planted, 1 << 32) };
    for v in &raw {
        lifter.push(v);
    }

    let mut out_levels: Vec<TreeLevel> = Vec::with_capacity(levels.len());
    for &q in levels {
        let base = q / q_star;
        let theta = match opts.theta {
            Some(t) => t,
            None => {
                let (first, _) = classes_at(&r, base - 0.02);
                let mut within: Vec<f64> = Vec::new();
                for c in &first {
                    for (a, &i) in c.iter().enumerate() {
                        for &j in &c[a + 1..] {
                            within.push(r.get(i, j));
                        }
                    }
                }
                if within.is_empty() {
                    0.02
                } else {
                    let med = median(&mut within.clone());
                    let mut dev: Vec<f64> = within.iter().map(|x| (x - med).abs()).collect();
                    (2.0 * median(&mut dev)).max(0.02)
                }
            }
        };
        let (classes, non_transitive) = classes_at(&r, base - theta);
        let mut centers = Vec::with_capacity(classes.len());
        let mut lifted = 0;
        for c in &classes {
            let members: Vec<&[f64]> = c.iter().map(|&k| raw[k].as_slice()).collect();
            let center = match opts.center_rule {
                CenterRule::RescaledMean => rescaled_mean(&members, q),
                CenterRule::Section => None,
            };
            let center = match center {
                Some(x) => x,
                None => {
                    let (x, l) = section_center(&members, q, &mut lifter)?;
                    lifted += l as usize;
                    x
                }
            };
            lifter.push(center.coords());
            centers.push(center);
        }
        out_levels.push(TreeLevel {
            q,
            theta,
            classes,
            centers,
            parents: Vec::new(),
            non_transitive,
            section_residual: 0.0,
            lifted,
        });
    }

    // class label of every leaf at every level
    let label_at = |lvl: &TreeLevel| {
        let mut l = vec![0usize; leaves.len()];
        for (i, c) in lvl.classes.iter().enumerate() {
            for &k in c {
                l[k] = i;
            }
        }
        l
    };
    let labels: Vec<Vec<usize>> = out_levels.iter().map(label_at).collect();
    let mut nesting_ok = true;
    for a in 0..out_levels.len() {
        let parents: Vec<usize> = out_levels[a]
            .classes
            .iter()
            .map(|c| {
                if a == 0 {
                    return 0;
                }
                let p = labels[a - 1][c[0]];
                if c.iter().any(|&k| labels[a - 1][k] != p) {
                    nesting_ok = false;
                }
                p
            })
            .collect();
        out_levels[a].parents = parents;
    }

    // sections: members and child centres around each class centre
    for a in 0..out_levels.len() {
        let mut worst: f64 = 0.0;
        for (i, c) in out_levels[a].classes.iter().enumerate() {
            let center = out_levels[a].centers[i].coords();
            for &k in c {
                worst = worst.max(section_residual(&raw[k], center));
            }
            if let Some(next) = out_levels.get(a + 1) {
                for (j, _) in next.parents.iter().enumerate().filter(|(_, &p)| p == i) {
                    worst = worst.max(section_residual(next.centers[j].coords(), center));
                }
            }
        }
        out_levels[a].section_residual = worst;
    }

    // pseudo-levels: root (q = 0, centre 0), user levels, leaves (q = q⋆)
    struct Pseudo<'a> {
        q: f64,
        label: Vec<usize>,
        classes: Vec<Vec<usize>>,
        centers: Vec<&'a [f64]>,
    }
    let zero = vec![0.0; dim];
    let mut pseudo = vec![Pseudo {
        q: 0.0,
        label: vec![0; leaves.len()],
        classes: vec![(0..leaves.len()).collect()],
        centers: vec![zero.as_slice()],
    }];
    for (a, l) in out_levels.iter().enumerate() {
        pseudo.push(Pseudo {
            q: l.q,
            label: labels[a].clone(),
            classes: l.classes.clone(),
            centers: l.centers.iter().map(|c| c.coords()).collect(),
        });
    }
    pseudo.push(Pseudo {
        q: q_star,
        label: (0..leaves.len()).collect(),
        classes: (0..leaves.len()).map(|k| vec![k]).collect(),
        centers: raw.iter().map(|v| v.as_slice()).collect(),
    });
    let mut orthogonality = Vec::new();
    for a in 0..pseudo.len() - 1 {
        let next = &pseudo[a + 1];
        for i in 0..pseudo[a].classes.len() {
            let inside = |c: &Vec<usize>| c.iter().all(|&k| pseudo[a].label[k] == i);
            let cands: Vec<(usize, usize)> = (a + 1..pseudo.len())
                .flat_map(|b| (0..pseudo[b].classes.len()).map(move |j| (b, j)))
                .filter(|&(b, j)| inside(&pseudo[b].classes[j]))
                .collect();
            for (x, &(b1, j1)) in cands.iter().enumerate() {
                for &(b2, j2) in &cands[x + 1..] {
                    let union: Vec<usize> =
                        pseudo[b1].classes[j1].iter().chain(&pseudo[b2].classes[j2]).copied().collect();
                    let l0 = next.label[union[0]];
                    if union.iter().all(|&k| next.label[k] == l0) {
                        continue;
                    }
                    let c = pseudo[a].centers[i];
                    let (u, v) = (pseudo[b1].centers[j1], pseudo[b2].centers[j2]);
                    let s: f64 = (0..dim).map(|t| (u[t] - c[t]) * (v[t] - c[t])).sum();
                    orthogonality.push(OrthogonalityRecord {
                        q: pseudo[a].q,
                        class: i,
                        q1: pseudo[b1].q,
                        class1: j1,
                        q2: pseudo[b2].q,
                        class2: j2,
                        residual: s.abs() / dim as f64,
                    });
                }
            }
        }
    }
    let max_orthogonality = orthogonality.iter().map(|o| o.residual).fold(0.0, f64::max);

    let mass_nesting = match samples {
        None => None,
        Some(pts) => {
            let total = pts.len() as f64;
            let mut worst: f64 = 0.0;
            for (a, lvl) in out_levels.iter().enumerate() {
                for (k, leaf) in leaves.iter().enumerate() {
                    let leaf_band = BandSpec::new(leaf.clone(), opts.band_delta)?;
                    let class_band = BandSpec::new(lvl.centers[labels[a][k]].clone(), opts.class_delta)?;
                    let escaped = pts
                        .iter()
                        .filter(|p| leaf_band.contains_raw(p.coords()) && !class_band.contains_raw(p.coords()))
                        .count();
                    worst = worst.max(escaped as f64 / total);
                }
            }
            Some(worst)
        }
    };

    Ok(UltraTree {
        q_star,
        leaf_clusters,
        leaves,
        levels: out_levels,
        nesting_ok,
        orthogonality,
        max_orthogonality,
        mass_nesting,
    })
}

impl UltraTree {
    /// Classes per level as sorted sets of decomposition cluster indices.
    pub fn partitions(&self) -> Vec<Vec<Vec<usize>>> {
        self.levels
            .iter()
            .map(|l| {
                let mut p: Vec<Vec<usize>> = l
                    .classes
                    .iter()
                    .map(|c| {
                        let mut v: Vec<usize> = c.iter().map(|&k| self.leaf_clusters[k]).collect();
                        v.sort_unstable();
                        v
                    })
                    .collect();
                p.sort();
                p
            })
            .collect()
    }

    /// Nested nodes `{q, center, members, children}`; class centres are
    /// referenced as `L<level>C<class>` and leaves as `S<cluster>`.
    pub fn to_json(&self) -> serde_json::Value {
        fn node(t: &UltraTree, level: usize, class: usize) -> serde_json::Value {
            if level == t.levels.len() {
                let k = class;
                return json!({
                    "q": t.q_star,
                    "center": format!("S{}", t.leaf_clusters[k]),
                    "members": [t.leaf_clusters[k]],
                    "children": [],
                });
            }
            let l = &t.levels[level];
            let members: Vec<usize> = l.classes[class].iter().map(|&k| t.leaf_clusters[k]).collect();
            let children: Vec<serde_json::Value> = if level + 1 < t.levels.len() {
                let next = &t.levels[level + 1];
                (0..next.classes.len()).filter(|&j| next.parents[j] == class).map(|j| node(t, level + 1, j)).collect()
            } else {
                l.classes[class].iter().map(|&k| node(t, t.levels.len(), k)).collect()
            };
            json!({
                "q": l.q,
                "center": format!("L{level}C{class}"),
                "members": members,
                "children": children,
            })
        }
        let children: Vec<serde_json::Value> = if self.levels.is_empty() {
            (0..self.leaves.len()).map(|k| node(self, 0, k)).collect()
        } else {
            (0..self.levels[0].classes.len()).map(|j| node(self, 0, j)).collect()
        };
        json!({
            "q": 0.0,
            "center": null,
            "members": self.leaf_clusters,
            "children": children,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{cluster_states, overlap_matrix, planted};

    fn matrix3(r12: f64, r23: f64, r13: f64) -> OverlapMatrix {
        OverlapMatrix::from_entries(3, vec![1.0, r12, r13, r12, 1.0, r23, r13, r23, 1.0]).unwrap()
    }

    #[test]
    fn single_triple() {
        assert!(triple_violates(0.8, 0.8, 0.1, 0.05));
        assert!(!triple_violates(0.8, 0.1, 0.1, 0.05));
        // two of the six labellings put the short side between σ₁ and σ₃
        let d = ultrametricity_defect(&matrix3(0.8, 0.8, 0.1), 0.05).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ultrametricity_defect(&matrix3(0.5, 0.2, 0.2), 0.05).unwrap(), 0.0);
    }

    #[test]
    fn planted_hierarchy_is_ultrametric() {
        let t = planted::hierarchy(256, 0.3, 0.7, 2, 2, 10, 3).unwrap();
        let m = overlap_matrix(&t.samples).unwrap();
        assert_eq!(ultrametricity_defect(&m, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn defect_is_monotone_in_eps() {
        let mut rng = stream(2, Purpose::Uniform, 0);
        let pts: Vec<_> = (0..60).map(|_| Configuration::uniform(32, 1.0, &mut rng).unwrap()).collect();
        let m = overlap_matrix(&pts).unwrap();
        let mut last = 1.0;
        for eps in [0.0, 0.05, 0.1, 0.2, 0.4] {
            let d = ultrametricity_defect(&m, eps).unwrap();
            assert!(d <= last);
            last = d;
        }
    }

    #[test]
    fn subsampling_matches_enumeration() {
        let mut rng = stream(4, Purpose::Uniform, 0);
        let pts: Vec<_> = (0..80).map(|_| Configuration::uniform(32, 1.0, &mut rng).unwrap()).collect();
        let m = overlap_matrix(&pts).unwrap();
        let exact = ultrametricity_defect(&m, 0.1).unwrap();
        let opts = UltraOptions { exact_max: 10, triples: 200_000, ..Default::default() };
        let sub = ultrametricity_defect_with(&m, 0.1, &opts).unwrap();
        let se = (exact * (1.0 - exact) / 200_000.0).sqrt();
        assert!((exact - sub).abs() < 5.0 * se + 1e-3);
        let seq = UltraOptions { execution: Execution::Sequential, ..opts.clone() };
        assert_eq!(sub, ultrametricity_defect_with(&m, 0.1, &seq).unwrap());
    }

    fn planted_tree() -> (planted::PlantedTree, StateDecomposition) {
        let t = planted::hierarchy(256, 0.3, 0.7, 2, 2, 20, 5).unwrap();
        let dec = cluster_states(&t.samples, 0.7, 0.1).unwrap();
        (t, dec)
    }

    #[test]
    fn planted_tree_is_recovered() {
        let (t, dec) = planted_tree();
        assert_eq!(dec.clusters.len(), 4);
        let tree = build_ultratree(&dec, &[0.3], &TreeOptions::default(), Some(&t.samples)).unwrap();
        // leaf ids of each cluster, then the planted super of each cluster
        let sup: Vec<usize> = dec.clusters.iter().map(|c| t.leaf_parent[t.sample_leaf[c[0]]]).collect();
        let mut want: Vec<Vec<usize>> = (0..2).map(|s| (0..4).filter(|&k| sup[k] == s).collect()).collect();
        want.sort();
        assert_eq!(tree.partitions(), vec![want]);
        assert!(tree.nesting_ok);
        assert_eq!(tree.levels[0].non_transitive, 0);
        assert!(tree.max_orthogonality < 1e-2, "{:?}", tree.orthogonality);
        assert!(tree.levels[0].section_residual < 1e-8);
        assert!(tree.levels[0].centers.iter().all(|c| c.is_on_sphere(0.3, 1e-8)));
        assert!(tree.mass_nesting.unwrap() < 1e-12);
        let js = tree.to_json();
        assert_eq!(js["children"].as_array().unwrap().len(), 2);
        assert_eq!(js["children"][0]["children"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn rescaled_means_miss_the_branch_points() {
        let (t, dec) = planted_tree();
        let opts = TreeOptions { center_rule: CenterRule::RescaledMean, ..Default::default() };
        let tree = build_ultratree(&dec, &[0.3], &opts, Some(&t.samples)).unwrap();
        assert_eq!(tree.partitions().len(), 1);
        assert!(tree.max_orthogonality > 0.05);
    }

    #[test]
    fn degenerate_trees() {
        let one = StateDecomposition {
            clusters: vec![vec![0]],
            weights: vec![1.0],
            centers: vec![Some(Configuration::canonical(8, 0.8).unwrap())],
            q_star: 0.8,
            eps: 0.1,
            pair_violation: 0.0,
        };
        let tree = build_ultratree(&one, &[0.2, 0.4, 0.6], &TreeOptions::default(), None).unwrap();
        assert!(tree.levels.iter().all(|l| l.classes == vec![vec![0]]));
        assert!(tree.nesting_ok);

        let mut a = vec![0.0; 8];
        a[0] = (8.0f64 * 0.8).sqrt();
        let mut b = vec![0.0; 8];
        b[1] = a[0];
        let two = StateDecomposition {
            clusters: vec![vec![0], vec![1]],
            weights: vec![0.5, 0.5],
            centers: vec![Some(Configuration::new(a).unwrap()), Some(Configuration::new(b).unwrap())],
            q_star: 0.8,
            eps: 0.1,
            pair_violation: 0.0,
        };
        let tree = build_ultratree(&two, &[0.4], &TreeOptions::default(), None).unwrap();
        assert_eq!(tree.levels[0].classes.len(), 2);
        assert!(build_ultratree(&two, &[0.4, 0.3], &TreeOptions::default(), None).is_err());
    }

    #[test]
    fn defect_csv() {
        let rows = [DefectRow { kind: "ultrametricity".into(), parameter: 0.1, value: 0.0, std_error: 0.0 }];
        let mut buf = Vec::new();
        write_defect_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "kind,parameter,value,std_error\nultrametricity,0.1,0.0,0.0\n");
    }
}
