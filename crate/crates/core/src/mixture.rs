//! Mixture polynomials `ν(x) = Σ_p γ_p² x^p` and the transforms applied to
//! them: restriction to a cross-section, removal of the one-spin part, and
//! rescaling to an inner sphere.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{GlassError, Result};

/// Largest degree accepted by default.
pub const DEFAULT_MAX_DEGREE: u32 = 32;

/// Finite mixture. `coeffs[p]` is `γ_p²`; index 0 is always zero (no external
/// field) and trailing zeros are trimmed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct Mixture {
    coeffs: Vec<f64>,
}

impl Mixture {
    /// Builds a mixture from `(degree, γ_p²)` pairs. Repeated degrees add up.
    pub fn new<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let mut coeffs = vec![0.0; 1];
        for (p, g2) in pairs {
            let field = format!("coeffs.{p}");
            if p == 0 {
                return Err(GlassError::invalid(field, "degree 0 (external field) is not supported"));
            }
            if p > DEFAULT_MAX_DEGREE {
                return Err(GlassError::invalid(field, format!("degree exceeds the cap {DEFAULT_MAX_DEGREE}")));
            }
            if !g2.is_finite() || g2 < 0.0 {
                return Err(GlassError::invalid(field, format!("coefficient must be finite and >= 0, got {g2}")));
            }
            let p = p as usize;
            if coeffs.len() <= p {
                coeffs.resize(p + 1, 0.0);
            }
            coeffs[p] += g2;
        }
        Self::from_dense(coeffs)
    }

    /// Pure p-spin mixture `ν(x) = x^p`.
    pub fn pure(p: u32) -> Self {
        Self::new([(p, 1.0)]).expect("pure mixture of a valid degree")
    }

    fn from_dense(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        coeffs[0] = 0.0;
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if !coeffs.iter().any(|&c| c > 0.0) {
            return Err(GlassError::invalid("coeffs", "mixture has no positive coefficient"));
        }
        Ok(Mixture { coeffs })
    }

    /// Parses the config-file literal, e.g. `{"2": 0.5, "3": 0.5}`.
    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self> {
        let mut pairs = Vec::with_capacity(map.len());
        for (key, &value) in map {
            let p: u32 = key
                .trim()
                .parse()
                .map_err(|_| GlassError::invalid(format!("coeffs.{key}"), "degree must be a positive integer"))?;
            pairs.push((p, value));
        }
        Self::new(pairs)
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.terms().map(|(p, c)| (p.to_string(), c)).collect()
    }

    /// Largest degree with a stored coefficient.
    pub fn max_degree(&self) -> u32 {
        (self.coeffs.len() - 1) as u32
    }

    /// `γ_p²` (zero for absent degrees).
    pub fn coeff(&self, p: u32) -> f64 {
        self.coeffs.get(p as usize).copied().unwrap_or(0.0)
    }

    /// Non-zero `(p, γ_p²)` terms in increasing degree.
    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, &c)| c > 0.0).map(|(p, &c)| (p as u32, c))
    }

    /// `ν(1) = Σ γ_p²`.
    pub fn variance(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// `order`-th derivative of ν at `x`.
    pub fn eval(&self, x: f64, order: u32) -> f64 {
        let order = order as usize;
        let mut acc = 0.0;
        for (p, &c) in self.coeffs.iter().enumerate().skip(order.max(1)) {
            if c == 0.0 {
                continue;
            }
            let falling: f64 = (0..order).map(|j| (p - j) as f64).product();
            acc += c * falling * x.powi((p - order) as i32);
        }
        acc
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x, 0)
    }

    /// Mixture `ν_q` of the Hamiltonian restricted to the cross-section
    /// through a point of `S^{N-1}(q)`:
    /// `α_k² = (1-q)^k Σ_{p≥k} γ_p² C(p,k) q^{p-k}`, so that
    /// `ν_q(x) = ν(q + (1-q)x) - ν(q)`.
    pub fn restrict(&self, q: f64) -> Result<Mixture> {
        if !(q > 0.0 && q < 1.0) {
            return Err(GlassError::invalid("q", format!("must lie in (0,1), got {q}")));
        }
        let pmax = self.coeffs.len() - 1;
        let mut alpha = vec![0.0; pmax + 1];
        for (k, a) in alpha.iter_mut().enumerate().skip(1) {
            let mut s = 0.0;
            for p in k..=pmax {
                let c = self.coeffs[p];
                if c > 0.0 {
                    s += c * binomial(p as u32, k as u32) * q.powi((p - k) as i32);
                }
            }
            *a = (1.0 - q).powi(k as i32) * s;
        }
        Self::from_dense(alpha)
    }

    /// `α_0²(√q) = ν(q)`, the variance carried by the centre of the section.
    pub fn restricted_constant(&self, q: f64) -> f64 {
        self.value(q)
    }

    /// Removes the degree-one coefficient (`ν_q → ν_{q,2}`).
    pub fn drop_one_spin(&self) -> Result<Mixture> {
        let mut c = self.coeffs.clone();
        if c.len() > 1 {
            c[1] = 0.0;
        }
        Self::from_dense(c)
    }

    /// Mixture `Σ q^p γ_p² x^p` of the Hamiltonian on `S^{N-1}(q)` after
    /// rescaling that sphere to the outer one.
    pub fn inner_sphere(&self, q: f64) -> Result<Mixture> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(GlassError::invalid("q", format!("must lie in (0,1], got {q}")));
        }
        let c = self.coeffs.iter().enumerate().map(|(p, &g)| g * q.powi(p as i32)).collect();
        Self::from_dense(c)
    }

    /// Multiplies every `γ_p²` by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Mixture> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(GlassError::invalid("factor", "must be positive"));
        }
        Self::from_dense(self.coeffs.iter().map(|c| c * factor).collect())
    }

    /// True when `ν''` is constant, i.e. the only curved term is degree 2.
    pub fn is_quadratic(&self) -> bool {
        self.terms().all(|(p, _)| p <= 2)
    }

    pub fn genericity_report(&self) -> GenericityReport {
        let (mut odd, mut even) = (Vec::new(), Vec::new());
        for (p, _) in self.terms() {
            if p % 2 == 1 {
                odd.push(p);
            } else {
                even.push(p);
            }
        }
        GenericityReport {
            odd_represented: !odd.is_empty(),
            even_represented: !even.is_empty(),
            odd_degrees: odd,
            even_degrees: even,
            generic: false,
            max_degree: self.max_degree(),
            note: "a finite mixture has finite sums of 1/p over both parities, so it is never generic; \
                   the parities present are listed for reference"
                .to_string(),
        }
    }
}

impl TryFrom<BTreeMap<String, f64>> for Mixture {
    type Error = GlassError;
    fn try_from(map: BTreeMap<String, f64>) -> Result<Self> {
        Mixture::from_map(&map)
    }
}

impl From<Mixture> for BTreeMap<String, f64> {
    fn from(m: Mixture) -> Self {
        m.to_map()
    }
}

impl std::fmt::Display for Mixture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.terms().map(|(p, c)| format!("{c}·x^{p}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericityReport {
    pub odd_degrees: Vec<u32>,
    pub even_degrees: Vec<u32>,
    pub odd_represented: bool,
    pub even_represented: bool,
    pub generic: bool,
    pub max_degree: u32,
    pub note: String,
}

/// `C(n, k)` as a float: exact integer arithmetic up to n = 20, log-gamma above.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= 20 {
        let k = k.min(n - k) as u64;
        let mut r: u64 = 1;
        for j in 0..k {
            r = r * (n as u64 - j) / (j + 1);
        }
        return r as f64;
    }
    let (n, k) = (n as f64, k as f64);
    (ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)).exp().round()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half_half() -> Mixture {
        Mixture::new([(2, 0.5), (4, 0.5)]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Mixture::pure(3).eval(1.0, 0), 1.0);
        assert!((Mixture::pure(2).eval(0.3, 1) - 0.6).abs() < 1e-15);
        assert!((half_half().eval(0.5, 0) - 0.15625).abs() < 1e-15);
        assert!((Mixture::pure(3).eval(0.5, 3) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn restrict_examples() {
        let r = Mixture::pure(2).restrict(0.5).unwrap();
        assert!((r.coeff(1) - 0.5).abs() < 1e-15);
        assert!((r.coeff(2) - 0.25).abs() < 1e-15);
        assert!((r.value(1.0) - 0.75).abs() < 1e-15);

        let m = Mixture::new([(2, 0.3), (3, 0.2), (5, 0.5)]).unwrap();
        let r = m.restrict(1e-12).unwrap();
        for p in 1..=5 {
            assert!((r.coeff(p) - m.coeff(p)).abs() < 1e-9, "degree {p}");
        }
        assert!(m.restrict(0.0).is_err());
        assert!(m.restrict(1.0).is_err());
    }

    #[test]
    fn drop_one_spin_examples() {
        let m = Mixture::new([(1, 0.5), (2, 0.25)]).unwrap();
        assert_eq!(m.drop_one_spin().unwrap(), Mixture::new([(2, 0.25)]).unwrap());
        assert_eq!(Mixture::pure(2).drop_one_spin().unwrap(), Mixture::pure(2));
        assert!(Mixture::new([(1, 0.3)]).unwrap().drop_one_spin().is_err());
    }

    #[test]
    fn inner_sphere_examples() {
        assert_eq!(Mixture::pure(3).inner_sphere(0.5).unwrap(), Mixture::new([(3, 0.125)]).unwrap());
        assert_eq!(half_half().inner_sphere(1.0).unwrap(), half_half());
        let m = Mixture::new([(2, 0.5), (3, 0.5)]).unwrap().inner_sphere(0.25).unwrap();
        assert!((m.coeff(2) - 0.03125).abs() < 1e-16);
        assert!((m.coeff(3) - 0.0078125).abs() < 1e-16);
        assert!(Mixture::pure(2).inner_sphere(0.0).is_err());
    }

    #[test]
    fn genericity_examples() {
        let r = Mixture::new([(2, 1.0), (3, 1.0)]).unwrap().genericity_report();
        assert!(r.odd_represented && r.even_represented && !r.generic);
        assert!(!half_half().genericity_report().odd_represented);
        assert!(!Mixture::pure(3).genericity_report().even_represented);
    }

    #[test]
    fn validation_names_field() {
        let mut map = BTreeMap::new();
        map.insert("2".to_string(), -1.0);
        match Mixture::from_map(&map) {
            Err(GlassError::Invalid { field, .. }) => assert_eq!(field, "coeffs.2"),
            other => panic!("unexpected {other:?}"),
        }
        let json = serde_json::to_string(&half_half()).unwrap();
        assert_eq!(json, r#"{"2":0.5,"4":0.5}"#);
        let back: Mixture = serde_json::from_str(&json).unwrap();
        assert_eq!(back, half_half());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(20, 10), 184756.0);
        assert_eq!(binomial(30, 15), 155117520.0);
        assert_eq!(binomial(32, 16), 601080390.0);
    }

    fn arb_mixture() -> impl Strategy<Value = Mixture> {
        prop::collection::vec(0.0f64..1.0, 1..8).prop_filter_map("nonzero", |v| {
            Mixture::new(v.into_iter().enumerate().map(|(i, c)| (i as u32 + 1, c))).ok()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn restriction_resums(m in arb_mixture(), q in 0.001f64..0.999, x in -1.0f64..1.0) {
            let r = m.restrict(q).unwrap();
            let direct = m.value(q + (1.0 - q) * x) - m.value(q);
            prop_assert!((r.value(x) - direct).abs() <= 1e-12);
            // variance split at x = 1
            prop_assert!((m.variance() - m.value(q) - r.value(1.0)).abs() <= 1e-12);
        }

        #[test]
        fn derivative_matches_finite_difference(m in arb_mixture(), x in -0.99f64..0.99) {
            let h = 1e-5;
            for order in 0..1u32 {
                let fd = (m.eval(x + h, order) - m.eval(x - h, order)) / (2.0 * h);
                prop_assert!((m.eval(x, order + 1) - fd).abs() <= 1e-8 * (1.0 + fd.abs()));
            }
        }
    }
}
