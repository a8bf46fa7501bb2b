use glasslab::exec::{mean, variance};
use glasslab::groundstate::{minimize_on_sphere, GroundStateOptions};
use glasslab::sampler::{free_energy_ti, mcmc_chain, SamplerOptions};
use glasslab::{Disorder, Mixture};
use glasslab_selftest::oracle::{two_spin_ground_state, Quadratic};

#[test]
fn sampler_energy_matches_contour_oracle() {
    let n = 64;
    let d = Disorder::sample(&Mixture::pure(2), n, 11).unwrap();
    let exact = Quadratic::from_two_spin(&d);
    for (beta, seed) in [(1.0, 1), (4.0, 2)] {
        let opts = SamplerOptions { chains: 8, burn_in: 2000, samples: 1000, thin: 4, seed, ..Default::default() };
        let s = mcmc_chain(&d, beta, 1.0, None, &opts).unwrap();
        // chain means are independent
        let per_chain: Vec<f64> = (0..opts.chains)
            .map(|c| {
                let e: Vec<f64> =
                    s.meta.chain_ids.iter().zip(&s.energies).filter(|(&i, _)| i == c).map(|(_, &e)| e).collect();
                mean(&e) / n as f64
            })
            .collect();
        let est = mean(&per_chain);
        let se = (variance(&per_chain) / opts.chains as f64).sqrt();
        let target = exact.mean_energy(beta);
        assert!((est - target).abs() < 4.0 * se + 1e-3, "beta {beta}: {est} ± {se} vs {target}");
    }
}

#[test]
fn thermodynamic_integration_matches_contour_oracle() {
    let n = 48;
    let d = Disorder::sample(&Mixture::pure(2), n, 12).unwrap();
    let beta = 1.5;
    let exact = Quadratic::from_two_spin(&d).free_energy(beta);
    let est = free_energy_ti(&d, beta, 9, &SamplerOptions { seed: 3, ..Default::default() }).unwrap();
    assert!((est.value - exact).abs() < 4.0 * est.std_error + 1e-3, "{est:?} vs {exact}");
}

#[test]
fn descent_reaches_the_eigen_oracle() {
    let d = Disorder::sample(&Mixture::pure(2), 100, 13).unwrap();
    let g = minimize_on_sphere(&d, 1.0, 4, &GroundStateOptions::default()).unwrap();
    assert!((g.value_per_site - two_spin_ground_state(&d)).abs() < 1e-8);
    // the Gibbs energy approaches it from above as β grows
    let q = Quadratic::from_two_spin(&d);
    let energies: Vec<f64> = [1.0, 4.0, 16.0, 64.0].iter().map(|&b| q.mean_energy(b)).collect();
    assert!(energies.windows(2).all(|w| w[1] < w[0]));
    assert!(energies[3] > g.value_per_site);
}
