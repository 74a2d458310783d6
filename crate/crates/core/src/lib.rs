//! Relaxed-projection splitting for `VI(T₁ + … + T_m, {c ≤ 0})`.
//!
//! [`solver::run`] drives the method on a [`Problem`]; [`problems::build`]
//! turns a serializable [`ProblemRecipe`] into one with a reference solution.

pub mod checks;
pub mod constraints;
pub mod error;
pub mod innerloop;
pub mod operators;
pub mod oracle;
pub mod problems;
pub mod solver;
pub mod space;

pub use constraints::{ConstraintFunction, Halfspace, SetDescriptor};
pub use error::{Error, Result};
pub use problems::ProblemRecipe;
pub use solver::{
    run, run_with_observer, Problem, RunOutcome, SolverOptions, StepRule, StepsizeSchedule,
    StopReason, TraceRecord,
};
pub use space::{pt, Point};
