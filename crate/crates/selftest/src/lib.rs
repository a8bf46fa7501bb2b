//! Acceptance suite for glasslab, with reference oracles that do not go
//! through the library's estimators.

mod criteria;
pub mod oracle;

use std::time::Instant;

use glasslab::Execution;
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub seed: u64,
    pub execution: Execution,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { seed: 2024, execution: Execution::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    /// Set when the run itself failed; `passed` is then false.
    pub error: Option<String>,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let detail = self.error.as_deref().map_or_else(|| self.detail.clone(), |e| format!("error: {e}"));
        format!("{verdict} {:>2} {} ({:.1}s): {detail}", self.id, self.title, self.seconds)
    }
}

pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    run: fn(&Settings) -> glasslab::Result<(bool, String)>,
}

impl Criterion {
    pub fn run(&self, s: &Settings) -> Outcome {
        let t = Instant::now();
        let r = (self.run)(s);
        let seconds = t.elapsed().as_secs_f64();
        match r {
            Ok((passed, detail)) => Outcome { id: self.id, title: self.title, passed, error: None, detail, seconds },
            Err(e) => Outcome {
                id: self.id,
                title: self.title,
                passed: false,
                error: Some(e.to_string()),
                detail: String::new(),
                seconds,
            },
        }
    }
}

pub fn criteria() -> Vec<Criterion> {
    use criteria::*;
    vec![
        Criterion { id: 1, title: "mixture identities", run: mixture_identities },
        Criterion { id: 2, title: "hamiltonian covariance", run: hamiltonian_covariance },
        Criterion { id: 3, title: "section decomposition", run: section_decomposition },
        Criterion { id: 4, title: "band entropy", run: band_entropy },
        Criterion { id: 5, title: "two-spin ground state", run: two_spin_ground_state },
        Criterion { id: 6, title: "replica-symmetric free energy", run: rs_free_energy },
        Criterion { id: 7, title: "symmetry-breaking transition", run: rsb_transition },
        Criterion { id: 8, title: "TAP consistency", run: tap_consistency },
        Criterion { id: 9, title: "MCMC free energy", run: mcmc_free_energy },
        Criterion { id: 10, title: "concentration", run: concentration },
        Criterion { id: 11, title: "states analytics", run: states_analytics },
        Criterion { id: 12, title: "landscape direction", run: landscape_direction },
    ]
}

/// Runs the criteria with ids in `only` (all when empty), in order.
pub fn run(only: &[u32], s: &Settings, mut each: impl FnMut(&Outcome)) -> Vec<Outcome> {
    criteria()
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .map(|c| {
            let o = c.run(s);
            each(&o);
            o
        })
        .collect()
}
