use glasslab::parisi::{cs_functional, solve, validate, ParisiMeasure, SolveOptions};
use glasslab::Mixture;
use proptest::prelude::*;

fn measure_strategy() -> impl Strategy<Value = ParisiMeasure> {
    (1usize..5)
        .prop_flat_map(|k| (prop::collection::vec(0.0f64..0.95, k), prop::collection::vec(0.05f64..1.0, k)))
        .prop_map(|(mut atoms, weights)| {
            atoms.sort_by(f64::total_cmp);
            atoms.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let w = weights[..atoms.len()].to_vec();
            ParisiMeasure::normalized(atoms, w).unwrap()
        })
}

fn mixture_strategy() -> impl Strategy<Value = Mixture> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
        .prop_filter("nonzero", |(a, b, c)| a + b + c > 0.1)
        .prop_map(|(a, b, c)| Mixture::new([(2, a), (3, b), (4, c)]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn functional_is_convex_along_blends(
        x0 in measure_strategy(),
        x1 in measure_strategy(),
        m in mixture_strategy(),
        beta in 0.3f64..3.0,
        lambda in 0.0f64..1.0,
    ) {
        let p0 = cs_functional(&x0, &m, beta).unwrap();
        let p1 = cs_functional(&x1, &m, beta).unwrap();
        let mid = cs_functional(&x0.blend(&x1, lambda).unwrap(), &m, beta).unwrap();
        prop_assert!(mid <= lambda * p1 + (1.0 - lambda) * p0 + 1e-10, "{mid} vs {p0} {p1}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn zero_is_in_support(a in 0.0f64..1.0, b in 0.1f64..1.0, beta in 0.5f64..3.0) {
        let m = Mixture::new([(2, a), (3, b)]).unwrap();
        let sol = solve(&m, beta, 3, &SolveOptions::default()).unwrap();
        prop_assert!(sol.measure.atoms()[0] < 1e-6, "{:?}", sol.measure);
    }
}

#[test]
fn three_spin_one_step_suffices() {
    let m = Mixture::pure(3);
    let opts = SolveOptions::default();
    let k2 = solve(&m, 2.0, 2, &opts).unwrap();
    let k4 = solve(&m, 2.0, 4, &opts).unwrap();
    assert!((k2.value - k4.value).abs() < 1e-6, "{} {}", k2.value, k4.value);
    assert!(k4.value <= k2.value + 1e-9);
    assert_eq!(k2.measure.atoms()[0], 0.0);
    assert!(validate(&k2.measure, &m, 2.0, 1e-6).unwrap().passed);
}

#[test]
fn measure_json_shape() {
    let x = ParisiMeasure::new(vec![0.0, 0.5], vec![0.25, 0.75]).unwrap();
    let v: serde_json::Value = serde_json::to_value(&x).unwrap();
    assert_eq!(v["atoms"], serde_json::json!([0.0, 0.5]));
    assert_eq!(v["weights"], serde_json::json!([0.25, 0.75]));
    let back: ParisiMeasure = serde_json::from_value(v).unwrap();
    assert_eq!(back, x);
}
