//! Sequential vs rayon execution of the hot data-parallel loops.
//!
//! Run with `cargo bench -p glasslab`; without the `parallel` feature both
//! arms run sequentially.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use glasslab::groundstate::{minimize_on_sphere, GroundStateOptions};
use glasslab::rng::{stream, Purpose};
use glasslab::sampler::{mcmc_chain, SamplerOptions};
use glasslab::states::{overlap_matrix_raw, ultrametricity_defect_with, UltraOptions};
use glasslab::{Configuration, Disorder, Execution, Mixture};

const MODES: [(&str, Execution); 2] = [("seq", Execution::Sequential), ("par", Execution::Parallel)];

fn uniform_points(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(7, Purpose::Uniform, 0);
    (0..count).map(|_| Configuration::uniform(dim, 1.0, &mut rng).unwrap().into_coords()).collect()
}

fn ground_state(c: &mut Criterion) {
    let d = Disorder::sample(&Mixture::pure(3), 48, 1).unwrap();
    d.materialize();
    let mut g = c.benchmark_group("ground_state_restarts");
    g.sample_size(10);
    for (name, execution) in MODES {
        let opts = GroundStateOptions { seed: 3, max_iters: 2000, execution, ..Default::default() };
        g.bench_function(name, |b| b.iter(|| minimize_on_sphere(black_box(&d), 1.0, 8, &opts).unwrap()));
    }
    g.finish();
}

fn overlaps(c: &mut Criterion) {
    let mut g = c.benchmark_group("overlap_matrix");
    for count in [200, 800] {
        let pts = uniform_points(128, count);
        for (name, execution) in MODES {
            g.bench_with_input(BenchmarkId::new(name, count), &pts, |b, pts| {
                b.iter(|| overlap_matrix_raw(black_box(pts), execution).unwrap())
            });
        }
    }
    g.finish();
}

fn chains(c: &mut Criterion) {
    let d = Disorder::sample(&Mixture::new([(2, 0.5), (3, 0.5)]).unwrap(), 32, 2).unwrap();
    let mut g = c.benchmark_group("mcmc_chains");
    g.sample_size(10);
    for (name, execution) in MODES {
        let opts = SamplerOptions {
            chains: 8,
            burn_in: 100,
            samples: 100,
            thin: 1,
            batches: 10,
            execution,
            ..Default::default()
        };
        g.bench_function(name, |b| b.iter(|| mcmc_chain(black_box(&d), 1.0, 1.0, None, &opts).unwrap()));
    }
    g.finish();
}

fn ultrametricity(c: &mut Criterion) {
    let m = overlap_matrix_raw(&uniform_points(64, 400), Execution::Sequential).unwrap();
    let mut g = c.benchmark_group("ultrametricity_defect");
    g.sample_size(10);
    for (name, execution) in MODES {
        let opts = UltraOptions { exact_max: 0, triples: 200_000, seed: 5, execution };
        g.bench_function(name, |b| b.iter(|| ultrametricity_defect_with(black_box(&m), 0.1, &opts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, ground_state, overlaps, chains, ultrametricity);
criterion_main!(benches);
