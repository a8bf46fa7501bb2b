//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria listed in `UNATTAINABLE` are expected to fail at the stated
//! sizes; any other failure, and any run error, fails the target.

use glasslab_selftest::{run, Settings};

const UNATTAINABLE: &[u32] = &[4, 11];

fn main() {
    let only: Vec<u32> = std::env::var("GLASS_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let outcomes = run(&only, &Settings::default(), |o| println!("{}", o.line()));
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    let unexpected: Vec<u32> = outcomes
        .iter()
        .filter(|o| o.error.is_some() || (!o.passed && !UNATTAINABLE.contains(&o.id)))
        .map(|o| o.id)
        .collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
