//! Reference values computed without the library's own estimators.

use glasslab::Disorder;
use nalgebra::{DMatrix, SymmetricEigen};
use statrs::distribution::{Beta, ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

/// The symmetric matrix `A` with `H(σ) = σᵀAσ` for a pure 2-spin disorder.
pub fn two_spin_matrix(d: &Disorder) -> DMatrix<f64> {
    let n = d.dim();
    let j = d.tensor(2);
    let g = d.mixture().coeff(2).sqrt() / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |r, c| 0.5 * g * (j[r * n + c] + j[c * n + r]))
}

/// `min_{‖σ‖²=N} H(σ)/N`, the smallest eigenvalue of `A`.
pub fn two_spin_ground_state(d: &Disorder) -> f64 {
    SymmetricEigen::new(two_spin_matrix(d)).eigenvalues.min()
}

/// Exact finite-N thermodynamics of `H(σ) = N Σ λᵢ uᵢ²` with `u` uniform on
/// the unit sphere, by contour integration of the inverse Laplace transform
///
/// `E exp(−Σ bᵢuᵢ²) = Γ(N/2) (1/2πi) ∫ e^z Π (z + bᵢ)^{−1/2} dz`,
///
/// along the vertical line through the real saddle point.
#[derive(Debug, Clone)]
pub struct Quadratic {
    lambda: Vec<f64>,
}

struct Contour {
    log_scale: f64,
    // ∫₀^∞ Re[e^{ψ(y)}] dy and ∫₀^∞ Re[e^{ψ(y)} w(z)] dy
    base: f64,
    weighted: f64,
}

impl Quadratic {
    pub fn from_two_spin(d: &Disorder) -> Self {
        Quadratic { lambda: SymmetricEigen::new(two_spin_matrix(d)).eigenvalues.iter().copied().collect() }
    }

    pub fn from_eigenvalues(lambda: Vec<f64>) -> Self {
        Quadratic { lambda }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    fn contour(&self, beta: f64) -> Contour {
        let n = self.dim() as f64;
        let b: Vec<f64> = self.lambda.iter().map(|l| beta * n * l).collect();
        let bmin = b.iter().copied().fold(f64::INFINITY, f64::min);
        // saddle: 1 = ½ Σ 1/(z + bᵢ) on (−b_min, −b_min + N/2]
        let dphi = |z: f64| 1.0 - 0.5 * b.iter().map(|bi| 1.0 / (z + bi)).sum::<f64>();
        let (mut lo, mut hi) = (-bmin, -bmin + 0.5 * n);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if mid <= -bmin || dphi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let z0 = hi;
        let a: Vec<f64> = b.iter().map(|bi| z0 + bi).collect();
        let log_scale = z0 - 0.5 * a.iter().map(|x| x.ln()).sum::<f64>();
        let curv = 0.5 * a.iter().map(|x| 1.0 / (x * x)).sum::<f64>();
        let width = 1.0 / curv.sqrt();
        let lam: Vec<f64> = self.lambda.iter().map(|l| n * l).collect();

        // e^{ψ(y)} = exp(iy) Π (1 + iy/aᵢ)^{−1/2}
        let point = |y: f64| -> (f64, f64) {
            let mut re_log = 0.0;
            let mut arg = y;
            let (mut wr, mut wi) = (0.0, 0.0);
            for (ai, li) in a.iter().zip(&lam) {
                let t = y / ai;
                re_log -= 0.25 * (t * t).ln_1p();
                arg -= 0.5 * t.atan();
                // ½ λᵢN / (aᵢ + iy)
                let den = ai * ai + y * y;
                wr += 0.5 * li * ai / den;
                wi -= 0.5 * li * y / den;
            }
            let mag = re_log.exp();
            let (c, s) = (arg.cos(), arg.sin());
            (mag * c, mag * (c * wr - s * wi))
        };
        let tail = |y: f64| -0.25 * a.iter().map(|ai| (y * y / (ai * ai)).ln_1p()).sum::<f64>();
        let mut ymax = 8.0 * width;
        while tail(ymax) > -36.0 {
            ymax *= 1.5;
        }
        // fine steps across the Gaussian core, then steps short against the
        // oscillation period (at least 2π)
        let core = 8.0 * width;
        let (mut base, mut weighted) = (0.0, 0.0);
        for (lo, hi, h0) in [(0.0, core, width / 64.0), (core, ymax, 0.1)] {
            let steps = (((hi - lo) / h0).ceil() as usize).div_ceil(2).max(1) * 2;
            let h = (hi - lo) / steps as f64;
            let (mut sb, mut sw) = (0.0, 0.0);
            for k in 0..=steps {
                let w = if k == 0 || k == steps {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let (p, q) = point(lo + k as f64 * h);
                sb += w * p;
                sw += w * q;
            }
            base += sb * h / 3.0;
            weighted += sw * h / 3.0;
        }
        Contour { log_scale, base, weighted }
    }

    /// `(1/N) log E exp(−βH)`.
    pub fn free_energy(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            return 0.0;
        }
        let n = self.dim() as f64;
        let c = self.contour(beta);
        (ln_gamma(0.5 * n) + c.log_scale + (c.base / std::f64::consts::PI).ln()) / n
    }

    /// Gibbs mean of `H/N` at `β`.
    pub fn mean_energy(&self, beta: f64) -> f64 {
        let n = self.dim() as f64;
        if beta == 0.0 {
            return self.lambda.iter().sum::<f64>() / n;
        }
        let c = self.contour(beta);
        c.weighted / c.base / n
    }
}

/// `P(R > r)` for two independent uniform points of `S^{N-1}`:
/// `(R+1)/2 ~ Beta((N−1)/2, (N−1)/2)`.
pub fn uniform_overlap_tail(dim: usize, r: f64) -> f64 {
    let a = 0.5 * (dim as f64 - 1.0);
    1.0 - Beta::new(a, a).expect("valid shape").cdf(0.5 * (r + 1.0))
}

/// `P(R₁₃ < min(R₁₂, R₂₃) − ε)` when the three overlaps are independent
/// `N(0, 1/N)`, the large-N law of uniform triples.
pub fn uniform_triple_violation(dim: usize, eps: f64) -> f64 {
    let z = Normal::new(0.0, 1.0).expect("standard normal");
    let c = eps * (dim as f64).sqrt();
    // min of two standard normals has density 2φ(m)(1 − Φ(m))
    let steps = 4000;
    let (lo, hi) = (-9.0, 9.0);
    let h = (hi - lo) / steps as f64;
    let f = |m: f64| 2.0 * (-0.5 * m * m).exp() / (2.0 * std::f64::consts::PI).sqrt() * (1.0 - z.cdf(m)) * z.cdf(m - c);
    let mut s = f(lo) + f(hi);
    for k in 1..steps {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use glasslab::rng::{stream, Purpose};
    use glasslab::{Configuration, Mixture};
    use rand::Rng;

    #[test]
    fn quadratic_matches_monte_carlo() {
        let lambda = vec![-0.9, -0.2, 0.1, 0.4, 0.5, 1.1];
        let q = Quadratic::from_eigenvalues(lambda.clone());
        let n = lambda.len() as f64;
        let beta = 0.7;
        let mut rng = stream(1, Purpose::Uniform, 0);
        let draws = 400_000;
        let (mut z, mut zh) = (0.0, 0.0);
        for _ in 0..draws {
            let u = Configuration::uniform(lambda.len(), 1.0 / n, &mut rng).unwrap();
            let h: f64 = n * u.coords().iter().zip(&lambda).map(|(x, l)| l * x * x).sum::<f64>();
            let w = (-beta * h).exp();
            z += w;
            zh += w * h;
        }
        let mc = (z / draws as f64).ln() / n;
        assert!((q.free_energy(beta) - mc).abs() < 2e-3, "{} vs {mc}", q.free_energy(beta));
        assert!((q.mean_energy(beta) - zh / z / n).abs() < 5e-3);
    }

    #[test]
    fn mean_energy_is_minus_the_derivative() {
        let d = Disorder::sample(&Mixture::pure(2), 40, 3).unwrap();
        let q = Quadratic::from_two_spin(&d);
        for beta in [0.3, 1.0, 4.0] {
            let h = 1e-4;
            let fd = -(q.free_energy(beta + h) - q.free_energy(beta - h)) / (2.0 * h);
            assert!((q.mean_energy(beta) - fd).abs() < 1e-6, "{beta}: {} vs {fd}", q.mean_energy(beta));
        }
        let trace: f64 = two_spin_matrix(&d).trace();
        assert!((q.mean_energy(0.0) - trace / 40.0).abs() < 1e-12);
        assert!((q.mean_energy(1e-9) - trace / 40.0).abs() < 1e-6);
        // low temperature: the mean energy approaches the ground state
        assert!((q.mean_energy(200.0) - two_spin_ground_state(&d)).abs() < 0.02);
    }

    #[test]
    fn overlap_tail_and_triples() {
        assert!((uniform_overlap_tail(50, 0.0) - 0.5).abs() < 1e-12);
        let mut rng = stream(2, Purpose::Uniform, 0);
        let (n, count) = (128usize, 200_000usize);
        let c = 0.1 * (n as f64).sqrt();
        let hits = (0..count)
            .filter(|_| {
                let z: [f64; 3] = [0, 1, 2].map(|_| rng.sample(rand_distr::StandardNormal));
                z[2] < z[0].min(z[1]) - c
            })
            .count();
        let p = uniform_triple_violation(n, 0.1);
        assert!((hits as f64 / count as f64 - p).abs() < 5.0 * (p / count as f64).sqrt());
    }
}
