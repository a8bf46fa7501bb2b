//! Config-driven experiment runner behind the `glass` binary.

// NaN must fail validation, so negated comparisons are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod landscape;
pub mod output;
pub mod run;

use glasslab::GlassError;

pub use config::{ExperimentConfig, Format, Kind};
pub use landscape::{spearman, LandscapeRow, RankCorrelation, Source};
pub use run::{run, Check, Summary};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_CAPACITY: u8 = 3;
/// Results were written but carry a numerical flag or a failed check.
pub const EXIT_FLAGGED: u8 = 4;

pub fn exit_code(e: &GlassError) -> u8 {
    match e {
        GlassError::Invalid { .. } | GlassError::Json(_) | GlassError::DimensionMismatch { .. } => EXIT_VALIDATION,
        GlassError::Capacity { .. } => EXIT_CAPACITY,
        _ => EXIT_FAILURE,
    }
}

pub fn summary_code(s: &Summary) -> u8 {
    if s.flagged || !s.passed {
        EXIT_FLAGGED
    } else {
        EXIT_OK
    }
}
