//! Invariant suites run by the `check` command, plus the inner-loop scaling
//! measurement behind `bench`.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{
    dist_upper, project_halfspace, project_halfspace_pair, ConstraintFunction, Halfspace,
    SetDescriptor,
};
use crate::error::{Error, Result};
use crate::innerloop::{run_inner, DEFAULT_MAX_INNER};
use crate::operators::{LogSumExp, MaxAffine, SquaredBall};
use crate::oracle::{self, fejer_audit, qp_project, random_pair_instance, QpInstance};
use crate::problems::{build, shipped, ProblemRecipe};
use crate::solver::{run, run_with_observer, SolverOptions, StepRule, StepSet, StepsizeSchedule};
use crate::space::Point;

pub const SUITES: &[&str] = &[
    "core",
    "operators",
    "projections",
    "innerloop",
    "fejer",
    "average",
    "problems",
];

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub lines: Vec<String>,
}

struct Collector {
    passed: bool,
    lines: Vec<String>,
}

impl Collector {
    fn new() -> Self {
        Collector {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.passed &= ok;
        self.lines
            .push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn finish(self, name: &str) -> SuiteReport {
        SuiteReport {
            name: name.into(),
            passed: self.passed,
            lines: self.lines,
        }
    }
}

/// Runs one named suite. Unknown names are an error.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let mut c = Collector::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "core" => suite_core(&mut c, &mut rng),
        "operators" => suite_operators(&mut c, &mut rng)?,
        "projections" => {
            let s = projection_sweep(seed, 1000)?;
            c.check(
                s.single_max < 1e-8,
                format!(
                    "single halfspace vs qp oracle, 1000 trials, max dev {:.2e}",
                    s.single_max
                ),
            );
            c.check(
                s.pair_max < 1e-8,
                format!(
                    "halfspace pair vs qp oracle, 1000 trials, max dev {:.2e}",
                    s.pair_max
                ),
            );
        }
        "innerloop" => {
            for (label, cf) in inner_loop_families() {
                let s = inner_exit_contract(&cf, &mut rng, 200, 100)?;
                c.check(
                    s.contract_violations == 0,
                    format!(
                        "{label}: dist_upper(z0) <= theta*alpha on {} calls",
                        s.calls
                    ),
                );
                c.check(
                    s.fejer_excess <= 1e-9,
                    format!("{label}: Fejer step excess {:.2e}", s.fejer_excess),
                );
            }
        }
        "fejer" => {
            let p = build(&interior_recipe())?;
            let sched = StepsizeSchedule::Explicit(StepRule::Harmonic { scale: 1.0 });
            let mut opts = SolverOptions::new(10_000);
            opts.snapshots = true;
            let out = run(&p, &sched, &opts, Point::from_vec(vec![2.0, 2.0]))?;
            let r = fejer_audit(&out.state.trace, &p, &sched, opts.theta)?;
            c.check(
                r.passed(),
                format!(
                    "interior quadratic, {} steps, min slack {:.2e}",
                    r.steps, r.min_slack
                ),
            );
            c.check(
                !r.summability_flagged,
                format!("bound terms summable, tail ratio {:.2e}", r.tail_ratio),
            );
        }
        "average" => {
            for (label, recipe, x0) in shipped() {
                let p = build(&recipe)?;
                let dev = average_identity_deviation(&p, x0, 10_000, 100)?;
                c.check(
                    dev <= 1e-10,
                    format!("{label}: recursive vs direct average, max dev {dev:.2e}"),
                );
            }
        }
        "problems" => {
            for (label, recipe, _) in shipped() {
                let p = build(&recipe)?;
                if p.certificate().is_none() {
                    c.check(true, format!("{label}: no certificate, skipped"));
                    continue;
                }
                let gap = oracle::min_vi_gap(&p, 10_000, &mut rng)?;
                c.check(
                    gap >= -1e-9,
                    format!("{label}: min VI gap over 10^4 feasible samples {gap:.2e}"),
                );
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}; expected one of {} or all",
                SUITES.join(", ")
            )))
        }
    }
    Ok(c.finish(name))
}

fn suite_core(c: &mut Collector, rng: &mut ChaCha8Rng) {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..6);
        let x = random_point(rng, n, 10.0);
        let y = random_point(rng, n, 10.0);
        let cs = x.dot(&y).abs() - x.norm() * y.norm();
        let tri = x.add(&y).norm() - x.norm() - y.norm();
        let sym = (x.dot(&y) - y.dot(&x)).abs();
        worst = worst.max(cs).max(tri).max(sym);
    }
    c.check(
        worst <= 1e-9,
        format!("inner product axioms on 1000 samples, worst excess {worst:.2e}"),
    );
}

fn suite_operators(c: &mut Collector, rng: &mut ChaCha8Rng) -> Result<()> {
    for (label, recipe, _) in shipped() {
        let p = build(&recipe)?;
        let mut worst = f64::INFINITY;
        for op in p.operators() {
            for _ in 0..500 {
                let x = random_point(rng, p.dim(), 5.0);
                let y = random_point(rng, p.dim(), 5.0);
                worst = worst.min(op.eval(&x).sub(&op.eval(&y)).dot(&x.sub(&y)));
            }
        }
        c.check(
            worst >= -1e-10,
            format!("{label}: monotonicity, min <Tx - Ty, x - y> = {worst:.2e}"),
        );
    }
    let lse = LogSumExp::new(3);
    let ball = SquaredBall::unit(3);
    let mut dev = 0.0f64;
    for _ in 0..100 {
        let x = random_point(rng, 3, 3.0);
        dev = dev.max(oracle::fd_subgradient_check(&lse, &x, 1e-6));
        dev = dev.max(oracle::fd_subgradient_check(&ball, &x, 1e-6));
    }
    c.check(
        dev < 1e-4,
        format!("finite-difference gradients, max dev {dev:.2e}"),
    );
    Ok(())
}

/// Suites in the given order, optionally on `parallel` worker threads.
pub fn run_suites(names: &[String], seed: u64, parallel: usize) -> Vec<Result<SuiteReport>> {
    let parallel = parallel.max(1);
    let mut out: Vec<Option<Result<SuiteReport>>> = (0..names.len()).map(|_| None).collect();
    for (chunk_names, chunk_out) in names.chunks(parallel).zip(out.chunks_mut(parallel)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_names
                .iter()
                .map(|n| s.spawn(move || run_suite(n, seed)))
                .collect();
            for (slot, h) in chunk_out.iter_mut().zip(handles) {
                *slot = Some(
                    h.join()
                        .unwrap_or_else(|_| Err(Error::InvalidArgument("suite panicked".into()))),
                );
            }
        });
    }
    out.into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

pub fn random_point(rng: &mut impl Rng, dim: usize, half_width: f64) -> Point {
    Point::from_vec(
        (0..dim)
            .map(|_| rng.random_range(-half_width..half_width))
            .collect(),
    )
}

#[derive(Clone, Copy, Debug)]
pub struct SweepStats {
    pub single_max: f64,
    pub pair_max: f64,
}

/// `project_halfspace` and `project_halfspace_pair` against [`qp_project`]
/// on `trials` random instances each, dimensions 2 to 5.
pub fn projection_sweep(seed: u64, trials: usize) -> Result<SweepStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut single_max = 0.0f64;
    let mut pair_max = 0.0f64;
    for t in 0..trials {
        let dim = 2 + t % 4;
        let a = random_point(&mut rng, dim, 2.0);
        let b = rng.random_range(-2.0..2.0);
        let h = Halfspace::new(a.clone(), b)?;
        let y = random_point(&mut rng, dim, 4.0);
        let interior = a.scale((b - 1.0) / a.norm_sq());
        let expect = qp_project(&QpInstance::new(vec![h.clone()], y.clone(), &interior)?)?;
        single_max = single_max.max(project_halfspace(&h, &y)?.dist(&expect));

        let (c, z, w, p) = random_pair_instance(&mut rng, dim);
        let d = w.sub(&z);
        let cut = Halfspace::new(d.clone(), d.dot(&z))?;
        let expect = qp_project(&QpInstance::new(vec![c.clone(), cut], w.clone(), &p)?)?;
        pair_max = pair_max.max(project_halfspace_pair(&c, &z, &w)?.dist(&expect));
    }
    Ok(SweepStats {
        single_max,
        pair_max,
    })
}

/// Unit ball (exact distance) and a max-of-affine polygon (Slater distance).
pub fn inner_loop_families() -> Vec<(&'static str, ConstraintFunction)> {
    let ball = ConstraintFunction::new(Arc::new(SquaredBall::unit(2)))
        .with_exact_set(SetDescriptor::Ball {
            center: Point::zeros(2),
            radius: 1.0,
        })
        .expect("valid ball");
    // Regular octagon of inradius 1.
    let rows = (0..8)
        .map(|i| {
            let t = i as f64 * std::f64::consts::FRAC_PI_4;
            (Point::from_vec(vec![t.cos(), t.sin()]), 1.0)
        })
        .collect();
    let octagon = ConstraintFunction::new(Arc::new(MaxAffine::new(rows).expect("valid rows")))
        .with_slater(Point::zeros(2))
        .expect("origin is interior");
    vec![("unit-ball", ball), ("max-affine", octagon)]
}

#[derive(Clone, Copy, Debug)]
pub struct ExitStats {
    pub calls: usize,
    pub contract_violations: usize,
    /// Largest `‖z₀ − x‖ − ‖z − x‖` over the sampled feasible `x`.
    pub fejer_excess: f64,
}

/// Runs the inner loop from random infeasible points with random `θα` and
/// checks the exit condition and the Fejér step against sampled `x ∈ C`.
pub fn inner_exit_contract(
    cf: &ConstraintFunction,
    rng: &mut impl Rng,
    calls: usize,
    samples: usize,
) -> Result<ExitStats> {
    let dim = cf.dim();
    let mut stats = ExitStats {
        calls: 0,
        contract_violations: 0,
        fejer_excess: f64::NEG_INFINITY,
    };
    while stats.calls < calls {
        let z = random_point(rng, dim, 6.0);
        if cf.value(&z) <= 0.0 {
            continue;
        }
        let theta = rng.random_range(0.25..2.0);
        let alpha = 10f64.powf(rng.random_range(-3.0..0.0));
        let r = run_inner(cf, &z, theta, alpha, DEFAULT_MAX_INNER)?;
        stats.calls += 1;
        if dist_upper(cf, &r.z0)? > theta * alpha {
            stats.contract_violations += 1;
        }
        let feasible: Vec<Point> = std::iter::repeat_with(|| random_point(rng, dim, 1.0))
            .filter(|x| cf.value(x) <= 0.0)
            .take(samples)
            .collect();
        for x in &feasible {
            stats.fejer_excess = stats.fejer_excess.max(r.z0.dist(x) - z.dist(x));
        }
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub theta_alpha: f64,
    pub mean_iterations: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log(mean iterations)` against `log(1/θα)`;
    /// absent for grids with fewer than two points.
    pub exponent: Option<f64>,
}

/// Mean inner iterations at each `θα` of the grid, from `reps` seeded
/// infeasible starting points (`θ = 1`).
pub fn inner_iteration_scaling(
    cf: &ConstraintFunction,
    grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if grid.is_empty() || reps == 0 || grid.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::Config(
            "scaling needs a nonempty positive grid and reps >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Point> = std::iter::repeat_with(|| random_point(&mut rng, cf.dim(), 4.0))
        .filter(|z| cf.value(z) > 0.0)
        .take(reps)
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    for &ta in grid {
        let t0 = Instant::now();
        let mut total = 0usize;
        for z in &starts {
            total += run_inner(cf, z, 1.0, ta, DEFAULT_MAX_INNER)?.iterations;
        }
        rows.push(ScalingRow {
            theta_alpha: ta,
            mean_iterations: total as f64 / reps as f64,
            wall_time: t0.elapsed().as_secs_f64(),
        });
    }
    let exponent = fit_exponent(&rows);
    Ok(ScalingReport { rows, exponent })
}

/// Least-squares slope of `log(mean iterations)` against `log(1/θα)`.
pub fn fit_exponent(rows: &[ScalingRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((1.0 / r.theta_alpha).ln(), r.mean_iterations.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Largest gap between the recursive average and `Σαⱼz^{j+1}/σₖ`, sampled
/// every `every` steps of an `iterations`-step harmonic run.
pub fn average_identity_deviation(
    problem: &crate::solver::Problem,
    x0: Point,
    iterations: usize,
    every: usize,
) -> Result<f64> {
    let sched = StepsizeSchedule::Explicit(StepRule::Harmonic { scale: 1.0 });
    let mut opts = SolverOptions::new(iterations);
    opts.cadence = iterations;
    let mut sum = Point::zeros(problem.dim());
    let mut comp = Point::zeros(problem.dim());
    let mut worst = 0.0f64;
    run_with_observer(problem, &sched, &opts, x0, |r| {
        // Compensated summation keeps the direct sum accurate over 10⁵ terms.
        let term = r.cycle.last().expect("cycle").scale(r.alpha);
        let y = term.sub(&comp);
        let t = sum.add(&y);
        comp = t.sub(&sum).sub(&y);
        sum = t;
        if r.k % every == 0 {
            let direct = sum.scale(1.0 / r.sigma);
            worst = worst.max(direct.max_abs_diff(&r.x_next));
        }
    })?;
    Ok(worst)
}

/// Largest violation of cycle containment and of the drift bound
/// `‖zⱼ − zᵢ‖ ≤ (j − i)ηₖαₖ` over a run.
pub fn cycle_invariant_excess(
    problem: &crate::solver::Problem,
    sched: &StepsizeSchedule,
    x0: Point,
    iterations: usize,
) -> Result<(f64, f64)> {
    let mut opts = SolverOptions::new(iterations);
    opts.cadence = iterations;
    let mut containment = 0.0f64;
    let mut drift = 0.0f64;
    run_with_observer(problem, sched, &opts, x0, |r| {
        for z in &r.cycle {
            let d = match &r.step_set {
                StepSet::Halfspace(h) => h.distance(z),
                StepSet::Exact(s) => s.distance(z).unwrap_or(f64::INFINITY),
            };
            containment = containment.max(d);
        }
        for i in 0..r.cycle.len() {
            for j in i..r.cycle.len() {
                let bound = (j - i) as f64 * r.eta * r.alpha;
                drift = drift.max(r.cycle[j].dist(&r.cycle[i]) - bound);
            }
        }
    })?;
    Ok((containment, drift))
}

fn interior_recipe() -> ProblemRecipe {
    ProblemRecipe::QuadraticBall {
        target: vec![0.3, -0.2],
        m: 2,
        center: None,
        radius: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_error() {
        assert!(run_suite("nope", 0).is_err());
    }

    #[test]
    fn core_and_projection_suites_pass() {
        for name in ["core", "projections", "innerloop"] {
            let r = run_suite(name, 1).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn scaling_single_point_has_no_fit() {
        let (_, ball) = &inner_loop_families()[0];
        let r = inner_iteration_scaling(ball, &[0.1], 5, 0).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.exponent.is_none());
    }

    #[test]
    fn scaling_affine_is_one_step() {
        let cf = ConstraintFunction::new(Arc::new(
            MaxAffine::affine(Point::from_vec(vec![1.0, 2.0]), 0.5).unwrap(),
        ))
        .with_surrogate(1.0 / 5f64.sqrt())
        .unwrap();
        let r = inner_iteration_scaling(&cf, &[0.2, 0.1, 0.05], 10, 4).unwrap();
        assert!(r.rows.iter().all(|row| row.mean_iterations == 1.0));
    }

    #[test]
    fn parallel_matches_serial() {
        let names: Vec<String> = ["core", "projections"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let a = run_suites(&names, 5, 1);
        let b = run_suites(&names, 5, 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.as_ref().unwrap().lines, y.as_ref().unwrap().lines);
        }
    }
}
