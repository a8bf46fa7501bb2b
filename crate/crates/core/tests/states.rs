use glasslab::rng::{stream, Purpose};
use glasslab::states::{build_ultratree, cluster_states, overlap_matrix, planted, ultrametricity_defect, TreeOptions};
use glasslab::Configuration;
use proptest::prelude::*;

fn tree_params() -> impl Strategy<Value = (f64, f64, usize, usize, u64)> {
    (0.15f64..0.4, 0.6f64..0.85, 1usize..4, 1usize..4, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reclustering_is_idempotent((q1, q_star, supers, leaves, seed) in tree_params()) {
        let t = planted::hierarchy(96, q1, q_star, supers, leaves, 6, seed).unwrap();
        let eps = 0.1;
        let dec = cluster_states(&t.samples, q_star, eps).unwrap();
        let again = cluster_states(&t.samples, q_star, eps).unwrap();
        prop_assert_eq!(&dec.clusters, &again.clusters);
        for c in &dec.clusters {
            let members: Vec<Configuration> = c.iter().map(|&i| t.samples[i].clone()).collect();
            let sub = cluster_states(&members, q_star, eps).unwrap();
            prop_assert_eq!(sub.clusters.len(), 1);
            prop_assert_eq!(sub.clusters[0].len(), c.len());
        }
        // disjoint, covering, weights non-increasing
        let mut seen: Vec<usize> = dec.clusters.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..t.samples.len()).collect::<Vec<_>>());
        prop_assert!(dec.weights.windows(2).all(|w| w[0] >= w[1]));
        for c in dec.centers.iter().flatten() {
            prop_assert!(c.is_on_sphere(q_star, 1e-8));
        }
    }

    #[test]
    fn tree_levels_nest((q1, q_star, supers, leaves, seed) in tree_params(), extra in 0.05f64..0.95) {
        let t = planted::hierarchy(128, q1, q_star, supers, leaves, 5, seed).unwrap();
        let dec = cluster_states(&t.samples, q_star, 0.1).unwrap();
        let mid = q1 + extra * (q_star - q1);
        let levels = [0.5 * q1, q1, mid];
        let tree = build_ultratree(&dec, &levels, &TreeOptions { seed, ..Default::default() }, Some(&t.samples)).unwrap();
        prop_assert!(tree.nesting_ok);
        let parts = tree.partitions();
        for w in parts.windows(2) {
            for upper in &w[1] {
                let hosts = w[0].iter().filter(|lower| upper.iter().all(|k| lower.contains(k))).count();
                prop_assert_eq!(hosts, 1);
            }
        }
        for l in &tree.levels {
            for c in &l.centers {
                prop_assert!(c.is_on_sphere(l.q, 1e-8), "level {} centre radius {}", l.q, c.radius_sq());
            }
        }
    }

    #[test]
    fn defect_is_monotone_in_eps(seed in any::<u64>(), count in 3usize..40, dim in 4usize..40) {
        let mut rng = stream(seed, Purpose::Uniform, 0);
        let pts: Vec<Configuration> = (0..count).map(|_| Configuration::uniform(dim, 1.0, &mut rng).unwrap()).collect();
        let m = overlap_matrix(&pts).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
            let d = ultrametricity_defect(&m, eps).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!(d <= prev);
            prev = d;
        }
        prop_assert_eq!(prev, 0.0);
    }

    #[test]
    fn overlap_matrix_is_a_correlation_matrix(seed in any::<u64>(), count in 1usize..30, dim in 2usize..30) {
        let mut rng = stream(seed, Purpose::Uniform, 1);
        let pts: Vec<Configuration> = (0..count).map(|_| Configuration::uniform(dim, 0.7, &mut rng).unwrap()).collect();
        let m = overlap_matrix(&pts).unwrap();
        for i in 0..count {
            prop_assert!((m.get(i, i) - 1.0).abs() < 1e-12);
            for j in 0..count {
                prop_assert!((m.get(i, j) - m.get(j, i)).abs() <= 1e-12);
                prop_assert!(m.get(i, j).abs() <= 1.0 + 1e-12);
            }
        }
    }
}

#[test]
fn planted_pair_of_clusters() {
    let p = planted::two_clusters(64, 200, 0.5, 0.05, 3).unwrap();
    let dec = cluster_states(&p.points, 0.5, 0.05).unwrap();
    assert_eq!(dec.clusters.len(), 2);
    for (c, centre) in dec.clusters.iter().zip(&dec.centers) {
        let sign = p.signs[c[0]];
        assert!(c.iter().all(|&i| p.signs[i] == sign));
        let want: Vec<f64> = p.center.coords().iter().map(|x| sign * x).collect();
        let got = centre.as_ref().unwrap().coords();
        let dist = want.iter().zip(got).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / 8.0;
        assert!(dist < 1e-2, "{dist}");
    }
}
