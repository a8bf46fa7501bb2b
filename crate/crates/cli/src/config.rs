//! Experiment configuration files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use glasslab::sampler::SamplerOptions;
use glasslab::{Execution, GlassError, Mixture, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    FreeEnergy,
    GroundState,
    Parisi,
    Tap,
    States,
    Landscape,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::FreeEnergy => "free-energy",
            Kind::GroundState => "ground-state",
            Kind::Parisi => "parisi",
            Kind::Tap => "tap",
            Kind::States => "states",
            Kind::Landscape => "landscape",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Band and replica schedule of the landscape pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    /// Radius of the centre sphere.
    pub q: f64,
    /// Band half-width; the default width for `N` when absent.
    pub delta: Option<f64>,
    pub rho: f64,
    pub m: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { q: 0.6, delta: None, rho: 0.2, m: 8 }
    }
}

/// Chain lengths shared by every Monte Carlo pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Chains {
    pub chains: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    pub tempering_levels: usize,
    /// Inverse-temperature nodes of thermodynamic integration.
    pub grid: usize,
}

impl Default for Chains {
    fn default() -> Self {
        let s = SamplerOptions::default();
        Chains {
            chains: s.chains,
            burn_in: s.burn_in,
            samples: s.samples,
            thin: s.thin,
            tempering_levels: s.tempering_levels,
            grid: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// Degree to `γ_p²`, e.g. `{"2": 0.5, "3": 0.5}`.
    pub mixture: BTreeMap<String, f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Inverse temperatures; every pipeline loops over them.
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub sampler: Chains,
    #[serde(default)]
    pub seed: u64,
    /// Independent disorder draws.
    #[serde(default = "one")]
    pub disorders: usize,
    /// Descents per ground-state search.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Atom budget of the variational solver.
    #[serde(default = "default_atoms")]
    pub atoms: usize,
    /// Centres per source in the landscape scan.
    #[serde(default = "one")]
    pub centers: usize,
    /// States pipeline: `q⋆` and the clustering tolerance.
    #[serde(default)]
    pub q_star: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_n() -> usize {
    64
}

fn default_betas() -> Vec<f64> {
    vec![1.0]
}

fn one() -> usize {
    1
}

fn default_restarts() -> usize {
    8
}

fn default_atoms() -> usize {
    3
}

fn default_eps() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        ExperimentConfig {
            kind,
            mixture: Mixture::pure(2).to_map(),
            n: default_n(),
            betas: default_betas(),
            schedule: Schedule::default(),
            sampler: Chains::default(),
            seed: 0,
            disorders: 1,
            restarts: default_restarts(),
            atoms: default_atoms(),
            centers: 1,
            q_star: None,
            eps: default_eps(),
            out: None,
        }
    }

    /// Reads a JSON config; a missing `kind` is taken from `fallback`.
    pub fn load(path: &Path, fallback: Kind) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, fallback)
    }

    pub fn parse(text: &str, fallback: Kind) -> Result<Self> {
        let mut v: serde_json::Value = serde_json::from_str(text)?;
        let obj = v.as_object_mut().ok_or_else(|| GlassError::invalid("config", "must be a JSON object"))?;
        obj.entry("kind").or_insert_with(|| serde_json::Value::String(fallback.as_str().into()));
        let c: ExperimentConfig =
            serde_json::from_value(v).map_err(|e| GlassError::invalid("config", e.to_string()))?;
        if c.kind != fallback {
            return Err(GlassError::invalid("kind", format!("config is for `{}`, command is `{fallback}`", c.kind)));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn mixture(&self) -> Result<Mixture> {
        Mixture::from_map(&self.mixture)
    }

    pub fn validate(&self) -> Result<()> {
        self.mixture()?;
        if self.n < 2 {
            return Err(GlassError::invalid("n", "need at least two spins"));
        }
        if self.betas.is_empty() {
            return Err(GlassError::invalid("betas", "empty"));
        }
        for (i, b) in self.betas.iter().enumerate() {
            if !(*b >= 0.0 && b.is_finite()) {
                return Err(GlassError::invalid(format!("betas.{i}"), format!("must be finite and >= 0, got {b}")));
            }
        }
        let s = &self.schedule;
        if !(s.q > 0.0 && s.q <= 1.0) {
            return Err(GlassError::invalid("schedule.q", format!("must lie in (0,1], got {}", s.q)));
        }
        if let Some(d) = s.delta {
            if !(d > 0.0 && d <= 1.0) {
                return Err(GlassError::invalid("schedule.delta", format!("must lie in (0,1], got {d}")));
            }
        }
        if !(s.rho >= 0.0) {
            return Err(GlassError::invalid("schedule.rho", "must be >= 0"));
        }
        if s.m == 0 {
            return Err(GlassError::invalid("schedule.m", "must be at least 1"));
        }
        if self.sampler.grid < 2 {
            return Err(GlassError::invalid("sampler.grid", "need at least two nodes"));
        }
        for (field, v) in [
            ("disorders", self.disorders),
            ("restarts", self.restarts),
            ("atoms", self.atoms),
            ("centers", self.centers),
        ] {
            if v == 0 {
                return Err(GlassError::invalid(field, "must be at least 1"));
            }
        }
        if let Some(q) = self.q_star {
            if !(q > 0.0 && q <= 1.0) {
                return Err(GlassError::invalid("q_star", format!("must lie in (0,1], got {q}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(GlassError::invalid("eps", "must be positive"));
        }
        let c = &self.sampler;
        for (field, v) in [
            ("sampler.chains", c.chains),
            ("sampler.samples", c.samples),
            ("sampler.thin", c.thin),
            ("sampler.tempering_levels", c.tempering_levels),
        ] {
            if v == 0 {
                return Err(GlassError::invalid(field, "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn sampler_options(&self, seed: u64, execution: Execution) -> SamplerOptions {
        let c = &self.sampler;
        SamplerOptions {
            chains: c.chains,
            burn_in: c.burn_in,
            samples: c.samples,
            thin: c.thin,
            tempering_levels: c.tempering_levels,
            batches: SamplerOptions::default().batches.min(c.samples.max(1)),
            seed,
            execution,
            ..Default::default()
        }
    }
}

/// Tabular output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::new(Kind::Landscape);
        c.mixture = [("2".to_string(), 0.25), ("4".to_string(), 0.75)].into();
        c.betas = vec![0.5, 1.0, 2.0];
        c.schedule.delta = Some(0.03);
        c.q_star = Some(0.7);
        c.out = Some("runs/a".into());
        let back = ExperimentConfig::parse(&c.to_json().unwrap(), Kind::Landscape).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn negative_coefficient_names_the_field() {
        let e = ExperimentConfig::parse(r#"{"mixture": {"2": -1}}"#, Kind::Parisi).unwrap_err();
        assert!(matches!(&e, GlassError::Invalid { field, .. } if field == "coeffs.2"), "{e}");
    }

    #[test]
    fn rejects_bad_fields() {
        let bad = [
            r#"{"mixture": {"2": 1}, "betas": [1, -1]}"#,
            r#"{"mixture": {"2": 1}, "schedule": {"q": 1.5}}"#,
            r#"{"mixture": {"2": 1}, "n": 1}"#,
            r#"{"mixture": {"2": 1}, "sampler": {"chains": 0}}"#,
        ];
        let fields = ["betas.1", "schedule.q", "n", "sampler.chains"];
        for (text, field) in bad.iter().zip(fields) {
            match ExperimentConfig::parse(text, Kind::Simulate) {
                Err(GlassError::Invalid { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(ExperimentConfig::parse(r#"{"mixture": {"2": 1}, "typo": 3}"#, Kind::Simulate).is_err());
        assert!(ExperimentConfig::parse(r#"{"kind": "tap", "mixture": {"2": 1}}"#, Kind::Parisi).is_err());
    }
}
