//! Numerical laboratory for spherical mixed p-spin glasses.

// NaN must fail validation, so negated comparisons are deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod geometry;
pub mod groundstate;
pub mod hamiltonian;
pub mod mixture;
pub mod parisi;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod states;
pub mod tap;
mod tensor;

pub use error::{GlassError, Result};
pub use exec::Execution;
pub use geometry::{BandSpec, Configuration};
pub use hamiltonian::{Disorder, SectionHamiltonian};
pub use mixture::Mixture;
