//! Crisanti–Sommers variational problem for spherical mixtures: functional,
//! finite-atom solver, stationarity checks, and the zero-temperature limit.

mod functional;
mod measure;
mod solve;
mod validate;
mod zero;

pub use functional::{cs_functional, BoundaryProblem, FirstVariation, StepProfile};
pub use measure::ParisiMeasure;
pub use solve::{
    continue_from, solve, solve_with_start, ParisiSolution, SolveOptions, MERGE_ATOM_TOL, MERGE_WEIGHT_TOL,
};
pub use validate::{rs_condition, validate, AtomReport, CheckOutcome, RsCondition, StationarityReport};
pub use zero::{ground_state_energy, zero_temperature, ZeroTemperature, ZeroTemperatureOptions};
