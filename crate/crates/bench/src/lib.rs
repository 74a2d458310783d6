//! Fixtures shared by the criterion benchmarks.

use relaxvi::problems::{build, shipped};
use relaxvi::solver::{Problem, SolverOptions, SolverState, StepRule, StepsizeSchedule};
use relaxvi::Point;

/// A shipped problem family and its starting point.
pub fn family(name: &str) -> (Problem, Point) {
    let (_, recipe, x0) = shipped()
        .into_iter()
        .find(|(n, _, _)| *n == name)
        .unwrap_or_else(|| panic!("unknown family {name}"));
    (build(&recipe).expect("shipped families build"), x0)
}

pub fn power_schedule() -> StepsizeSchedule {
    StepsizeSchedule::Explicit(StepRule::Power {
        scale: 1.0,
        exponent: 0.55,
    })
}

/// Solver state after `warmup` steps, so timed steps see a realistic `k`.
pub fn warm_state(problem: &Problem, x0: Point, warmup: usize) -> SolverState {
    let sched = power_schedule();
    let opts = quiet_options(warmup.max(1));
    let mut state = SolverState::new(x0);
    for _ in 0..warmup {
        relaxvi::solver::outer_step(problem, &sched, &opts, &mut state).expect("warmup step");
    }
    state
}

/// Options that keep only the first trace row.
pub fn quiet_options(max_outer: usize) -> SolverOptions {
    let mut opts = SolverOptions::new(max_outer);
    opts.cadence = usize::MAX;
    opts
}
