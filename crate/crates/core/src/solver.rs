//! The outer iteration.
//!
//! Each step obtains `(z₀ᵏ, Cₖ)` from the feasible shortcut or the inner loop,
//! runs the cycle `zᵢ = P_{Cₖ}(z_{i−1} − αₖuᵢ)` with `uᵢ ∈ Tᵢ(z_{i−1})`, sets
//! `z^{k+1} = z_m`, `σₖ = σ_{k−1} + αₖ` and updates the ergodic average
//! `x^{k+1} = (1 − αₖ/σₖ)xᵏ + (αₖ/σₖ)z^{k+1}`. The average is the sequence
//! with the convergence guarantee; `zᵏ` alone may cycle.

use std::time::Instant;

use crate::constraints::{dist_upper, exact_project, ConstraintFunction, Halfspace, SetDescriptor};
use crate::error::{check_dim, Error, Result};
use crate::innerloop::{feasible_shortcut, run_inner, DEFAULT_MAX_INNER};
use crate::operators::SharedOperator;
use crate::problems::ProblemRecipe;
use crate::space::Point;

/// Base sequence of a stepsize schedule.
#[derive(Clone, Debug, PartialEq)]
pub enum StepRule {
    /// `scale/(k+1)`
    Harmonic { scale: f64 },
    /// `scale/(k+1)^exponent`, exponent in (½, 1]
    Power { scale: f64, exponent: f64 },
    /// `value` for every k. Not square-summable; kept for diagnostics.
    Constant { value: f64 },
}

impl StepRule {
    pub fn value(&self, k: usize) -> f64 {
        let n = (k + 1) as f64;
        match *self {
            StepRule::Harmonic { scale } => scale / n,
            StepRule::Power { scale, exponent } => scale / n.powf(exponent),
            StepRule::Constant { value } => value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepRule::Harmonic { scale } => scale > 0.0 && scale.is_finite(),
            StepRule::Power { scale, exponent } => {
                scale > 0.0 && scale.is_finite() && exponent > 0.5 && exponent <= 1.0
            }
            StepRule::Constant { value } => value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid step rule {self:?}: need positive scale and exponent in (0.5, 1]"
            )))
        }
    }

    /// `Σ rule(k)² < ∞`
    pub fn is_square_summable(&self) -> bool {
        !matches!(self, StepRule::Constant { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepsizeSchedule {
    /// `αₖ = rule(k)`
    Explicit(StepRule),
    /// `αₖ = βₖ/ηₖ` with `βₖ = rule(k)`, so that `ηₖαₖ = βₖ`.
    Adaptive(StepRule),
}

impl StepsizeSchedule {
    pub fn rule(&self) -> &StepRule {
        match self {
            StepsizeSchedule::Explicit(r) | StepsizeSchedule::Adaptive(r) => r,
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, StepsizeSchedule::Adaptive(_))
    }
}

pub fn stepsize(schedule: &StepsizeSchedule, k: usize, eta: f64) -> Result<f64> {
    if !(eta >= 1.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eta must be finite and >= 1, got {eta}"
        )));
    }
    let alpha = match schedule {
        StepsizeSchedule::Explicit(r) => r.value(k),
        StepsizeSchedule::Adaptive(r) => r.value(k) / eta,
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!(
            "stepsize at k = {k} is {alpha}, must be > 0"
        )));
    }
    Ok(alpha)
}

/// Which set the splitting cycle projects onto.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeasibilityPath {
    /// Separating halfspaces from the inner loop or the feasible shortcut.
    Relaxed,
    /// The exact projection onto `C`, for sets like subspaces where it is cheap.
    ExactProjection,
}

/// VI(T₁ + ⋯ + T_m, {x : c(x) ≤ 0}).
#[derive(Clone, Debug)]
pub struct Problem {
    operators: Vec<SharedOperator>,
    constraint: ConstraintFunction,
    path: FeasibilityPath,
    known_solution: Option<Point>,
    certificate: Option<Vec<Point>>,
    label: String,
    recipe: Option<ProblemRecipe>,
}

impl Problem {
    pub fn new(
        operators: Vec<SharedOperator>,
        constraint: ConstraintFunction,
        label: impl Into<String>,
    ) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::EmptyOperatorList);
        }
        let dim = constraint.dim();
        for op in &operators {
            check_dim(dim, op.dim())?;
        }
        Ok(Problem {
            operators,
            constraint,
            path: FeasibilityPath::Relaxed,
            known_solution: None,
            certificate: None,
            label: label.into(),
            recipe: None,
        })
    }

    pub fn with_exact_projection(mut self) -> Result<Self> {
        if self.constraint.exact_set().is_none() {
            return Err(Error::Config(
                "exact projection path needs an exact set".into(),
            ));
        }
        self.path = FeasibilityPath::ExactProjection;
        Ok(self)
    }

    /// Attaches a solution `x*` and optionally a certificate: elements
    /// `ūᵢ ∈ Tᵢ(x*)` whose sum `ū` satisfies `⟨ū, x − x*⟩ ≥ 0` on `C`.
    pub fn with_known_solution(
        mut self,
        x: Point,
        certificate: Option<Vec<Point>>,
    ) -> Result<Self> {
        check_dim(self.dim(), x.dim())?;
        let c = self.constraint.value(&x);
        if c > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "known solution is infeasible: c(x*) = {c}"
            )));
        }
        if let Some(parts) = &certificate {
            check_dim(self.operators.len(), parts.len())?;
            for p in parts {
                check_dim(self.dim(), p.dim())?;
            }
        }
        self.known_solution = Some(x);
        self.certificate = certificate;
        Ok(self)
    }

    /// Records the recipe the problem was built from, for reference solvers.
    pub fn with_recipe(mut self, recipe: ProblemRecipe) -> Self {
        self.recipe = Some(recipe);
        self
    }

    pub fn dim(&self) -> usize {
        self.constraint.dim()
    }

    pub fn m(&self) -> usize {
        self.operators.len()
    }

    pub fn operators(&self) -> &[SharedOperator] {
        &self.operators
    }

    pub fn constraint(&self) -> &ConstraintFunction {
        &self.constraint
    }

    pub fn path(&self) -> FeasibilityPath {
        self.path
    }

    pub fn known_solution(&self) -> Option<&Point> {
        self.known_solution.as_ref()
    }

    pub fn certificate(&self) -> Option<&[Point]> {
        self.certificate.as_deref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn recipe(&self) -> Option<&ProblemRecipe> {
        self.recipe.as_ref()
    }

    /// `η̄ = maxᵢ‖ūᵢ‖` and `‖ū‖` from the certificate.
    pub fn certificate_norms(&self) -> Option<(f64, f64)> {
        let parts = self.certificate.as_ref()?;
        let eta_bar = parts.iter().map(Point::norm).fold(0.0, f64::max);
        let mut sum = Point::zeros(self.dim());
        for p in parts {
            sum.add_scaled_mut(1.0, p);
        }
        Some((eta_bar, sum.norm()))
    }
}

/// Per-step increment of the quasi-Fejér bound:
/// `m[(ηα)² + (m−1)·η̄·η·α²] + 2θ‖ū‖α²`.
pub fn fejer_increment(
    m: usize,
    eta: f64,
    alpha: f64,
    eta_bar: f64,
    u_bar_norm: f64,
    theta: f64,
) -> f64 {
    let m = m as f64;
    m * ((eta * alpha).powi(2) + (m - 1.0) * eta_bar * eta * alpha * alpha)
        + 2.0 * theta * u_bar_norm * alpha * alpha
}

/// The set `Cₖ` of one outer step.
#[derive(Clone, Debug, PartialEq)]
pub enum StepSet {
    Halfspace(Halfspace),
    Exact(SetDescriptor),
}

impl StepSet {
    pub fn project(&self, y: &Point) -> Result<Point> {
        match self {
            StepSet::Halfspace(h) => crate::constraints::project_halfspace(h, y),
            StepSet::Exact(s) => exact_project(s, y),
        }
    }

    pub fn distance(&self, y: &Point) -> Result<f64> {
        match self {
            StepSet::Halfspace(h) => Ok(h.distance(y)),
            StepSet::Exact(s) => s.distance(y),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StopRule {
    pub max_outer: usize,
    pub target_err: Option<f64>,
    pub target_dist: Option<f64>,
}

impl StopRule {
    pub fn iterations(max_outer: usize) -> Self {
        StopRule {
            max_outer,
            target_err: None,
            target_dist: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub theta: f64,
    pub max_inner: usize,
    pub stop: StopRule,
    /// Keep every `cadence`-th trace record (the last step is always kept).
    pub cadence: usize,
    /// Store `zᵏ`, `z^{k+1}` and the cycle's `‖uᵢ‖` in each record.
    pub snapshots: bool,
}

impl SolverOptions {
    pub fn new(max_outer: usize) -> Self {
        SolverOptions {
            theta: 1.0,
            max_inner: DEFAULT_MAX_INNER,
            stop: StopRule::iterations(max_outer),
            cadence: 1,
            snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!(
                "theta must be > 0, got {}",
                self.theta
            )));
        }
        if self.max_inner == 0 || self.cadence == 0 || self.stop.max_outer == 0 {
            return Err(Error::Config(
                "max_inner, cadence and max_outer must all be >= 1".into(),
            ));
        }
        for t in [self.stop.target_err, self.stop.target_dist]
            .into_iter()
            .flatten()
        {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("stop targets must be > 0, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub z_prev: Point,
    pub z_next: Point,
    pub u_norms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub alpha_k: f64,
    /// `max{1, maxᵢ‖uᵢ‖}` over the cycle's actual selections.
    pub eta_k: f64,
    pub sigma_k: f64,
    pub inner_iterations: usize,
    /// `dist_upper(x^{k+1})`
    pub dist_x: f64,
    pub dist_z0: f64,
    /// `‖x^{k+1} − x*‖` when a solution is known.
    pub err_x: Option<f64>,
    /// `‖zᵏ − x*‖² + bound − ‖z^{k+1} − x*‖²` when a certificate is known;
    /// nonnegative whenever the quasi-Fejér inequality holds.
    pub fejer_slack: Option<f64>,
    /// Seconds since the run started.
    pub wall_time: f64,
    /// Pre-cycle estimate of `ηₖ` (adaptive schedules only).
    pub eta_probe: Option<f64>,
    /// Realised `ηₖ` exceeded the probe by more than a factor of 10.
    pub eta_flagged: bool,
    pub snapshot: Option<Snapshot>,
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub k: usize,
    pub z: Point,
    pub x: Point,
    /// `Σ_{j<k} αⱼ`; zero before the first step.
    pub sigma: f64,
    pub last_eta: f64,
    pub trace: Vec<TraceRecord>,
    started: Instant,
}

impl SolverState {
    /// `z⁰ = x⁰`.
    pub fn new(x0: Point) -> Self {
        SolverState {
            k: 0,
            z: x0.clone(),
            x: x0,
            sigma: 0.0,
            last_eta: 1.0,
            trace: Vec::new(),
            started: Instant::now(),
        }
    }
}

/// Everything one outer step computed, for observers and invariant checks.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    pub step_set: StepSet,
    /// `z₀, z₁, …, z_m`; `z_m = z^{k+1}`.
    pub cycle: Vec<Point>,
    pub selections: Vec<Point>,
    pub z_prev: Point,
    pub x_next: Point,
    pub sigma: f64,
    pub record: TraceRecord,
}

struct Relaxation {
    z0: Point,
    set: StepSet,
    iterations: usize,
}

fn relax(problem: &Problem, z: &Point, alpha: f64, options: &SolverOptions) -> Result<Relaxation> {
    let cf = problem.constraint();
    match problem.path() {
        FeasibilityPath::ExactProjection => {
            let set = cf.exact_set().expect("checked at construction").clone();
            Ok(Relaxation {
                z0: exact_project(&set, z)?,
                set: StepSet::Exact(set),
                iterations: 0,
            })
        }
        FeasibilityPath::Relaxed => {
            let r = if cf.value(z) <= 0.0 {
                feasible_shortcut(cf, z)?
            } else {
                run_inner(cf, z, options.theta, alpha, options.max_inner)?
            };
            Ok(Relaxation {
                z0: r.z0,
                set: StepSet::Halfspace(r.sep),
                iterations: r.iterations,
            })
        }
    }
}

fn probe_eta(problem: &Problem, at: &Point) -> f64 {
    problem
        .operators()
        .iter()
        .map(|op| op.eval(at).norm())
        .fold(1.0, f64::max)
}

const MAX_PROBE_ROUNDS: usize = 8;

/// One iteration of the method; advances `state` in place.
pub fn outer_step(
    problem: &Problem,
    schedule: &StepsizeSchedule,
    options: &SolverOptions,
    state: &mut SolverState,
) -> Result<StepReport> {
    check_dim(problem.dim(), state.z.dim())?;
    let k = state.k;

    let (alpha, eta_probe, relaxation) = match schedule {
        StepsizeSchedule::Explicit(_) => {
            let alpha = stepsize(schedule, k, 1.0)?;
            (alpha, None, relax(problem, &state.z, alpha, options)?)
        }
        StepsizeSchedule::Adaptive(_) => {
            // ηₖ depends on the cycle's start point, which depends on αₖ
            // through the inner loop tolerance. Start from a probe at zᵏ and
            // re-run the inner loop while the probe at z₀ grows.
            let mut eta = probe_eta(problem, &state.z);
            let mut alpha = stepsize(schedule, k, eta)?;
            let mut rel = relax(problem, &state.z, alpha, options)?;
            for _ in 0..MAX_PROBE_ROUNDS {
                let at_z0 = probe_eta(problem, &rel.z0);
                if at_z0 <= eta {
                    break;
                }
                eta = at_z0;
                alpha = stepsize(schedule, k, eta)?;
                rel = relax(problem, &state.z, alpha, options)?;
            }
            (alpha, Some(eta), rel)
        }
    };

    let Relaxation {
        z0,
        set,
        iterations,
    } = relaxation;
    let dist_z0 = dist_upper(problem.constraint(), &z0)?;

    let m = problem.m();
    let mut cycle = Vec::with_capacity(m + 1);
    let mut selections = Vec::with_capacity(m);
    cycle.push(z0);
    for op in problem.operators() {
        let prev = cycle.last().expect("cycle starts with z0");
        let u = op.eval(prev);
        let next = set.project(&prev.add_scaled(-alpha, &u))?;
        selections.push(u);
        cycle.push(next);
    }
    let z_next = cycle.last().expect("m >= 1").clone();
    if !z_next.is_finite() {
        return Err(Error::NonFiniteIterate { k });
    }

    let u_norms: Vec<f64> = selections.iter().map(Point::norm).collect();
    let eta = u_norms.iter().copied().fold(1.0, f64::max);
    let eta_flagged = eta_probe.is_some_and(|p| eta > 10.0 * p);

    let sigma = state.sigma + alpha;
    let ratio = alpha / sigma;
    let x_next = if k == 0 {
        z_next.clone()
    } else {
        state.x.scale(1.0 - ratio).add_scaled(ratio, &z_next)
    };
    if !x_next.is_finite() {
        return Err(Error::NonFiniteIterate { k });
    }

    let known = problem.known_solution();
    let err_x = known.map(|xs| x_next.dist(xs));
    let fejer_slack = match (known, problem.certificate_norms()) {
        (Some(xs), Some((eta_bar, u_bar))) => {
            let bound = fejer_increment(m, eta, alpha, eta_bar, u_bar, options.theta);
            Some(state.z.dist_sq(xs) + bound - z_next.dist_sq(xs))
        }
        _ => None,
    };

    let record = TraceRecord {
        k,
        alpha_k: alpha,
        eta_k: eta,
        sigma_k: sigma,
        inner_iterations: iterations,
        dist_x: dist_upper(problem.constraint(), &x_next)?,
        dist_z0,
        err_x,
        fejer_slack,
        wall_time: state.started.elapsed().as_secs_f64(),
        eta_probe,
        eta_flagged,
        snapshot: options.snapshots.then(|| Snapshot {
            z_prev: state.z.clone(),
            z_next: z_next.clone(),
            u_norms: u_norms.clone(),
        }),
    };
    if k.is_multiple_of(options.cadence) {
        state.trace.push(record.clone());
    }

    let z_prev = std::mem::replace(&mut state.z, z_next);
    state.x = x_next.clone();
    state.sigma = sigma;
    state.last_eta = eta;
    state.k += 1;

    Ok(StepReport {
        k,
        alpha,
        eta,
        step_set: set,
        cycle,
        selections,
        z_prev,
        x_next,
        sigma,
        record,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxOuter,
    TargetErr,
    TargetDist,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxOuter => "max-outer",
            StopReason::TargetErr => "target-err",
            StopReason::TargetDist => "target-dist",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: SolverState,
    pub stop_reason: StopReason,
}

pub fn run(
    problem: &Problem,
    schedule: &StepsizeSchedule,
    options: &SolverOptions,
    x0: Point,
) -> Result<RunOutcome> {
    run_with_observer(problem, schedule, options, x0, |_| {})
}

/// [`run`], calling `observer` after every outer step.
pub fn run_with_observer(
    problem: &Problem,
    schedule: &StepsizeSchedule,
    options: &SolverOptions,
    x0: Point,
    mut observer: impl FnMut(&StepReport),
) -> Result<RunOutcome> {
    options.validate()?;
    schedule.rule().validate()?;
    check_dim(problem.dim(), x0.dim())?;
    if options.stop.target_err.is_some() && problem.known_solution().is_none() {
        return Err(Error::Config(
            "target_err needs a problem with a known solution".into(),
        ));
    }

    let mut state = SolverState::new(x0);
    loop {
        let report = outer_step(problem, schedule, options, &mut state)?;
        observer(&report);
        let rec = &report.record;
        let reason = if options
            .stop
            .target_err
            .zip(rec.err_x)
            .is_some_and(|(t, e)| e <= t)
        {
            Some(StopReason::TargetErr)
        } else if options.stop.target_dist.is_some_and(|t| rec.dist_x <= t) {
            Some(StopReason::TargetDist)
        } else if state.k >= options.stop.max_outer {
            Some(StopReason::MaxOuter)
        } else {
            None
        };
        if let Some(stop_reason) = reason {
            if state.trace.last().map(|r| r.k) != Some(report.k) {
                state.trace.push(report.record);
            }
            return Ok(RunOutcome { state, stop_reason });
        }
    }
}
