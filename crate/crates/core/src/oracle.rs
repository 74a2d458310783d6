//! Brute-force validators, independent of the solver code paths.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::constraints::{exact_project, Halfspace, SetDescriptor};
use crate::error::{check_dim, Error, Result};
use crate::operators::ConvexFunction;
use crate::problems::{FunctionSpec, ProblemRecipe};
use crate::solver::{fejer_increment, Problem, StepsizeSchedule, TraceRecord};
use crate::space::Point;

pub const QP_MAX_ROWS: usize = 8;
pub const QP_MAX_DIM: usize = 5;

/// Least-distance problem `min ‖x − query‖²` over at most 8 halfspaces.
#[derive(Clone, Debug)]
pub struct QpInstance {
    rows: Vec<Halfspace>,
    query: Point,
}

impl QpInstance {
    /// `interior` certifies that the feasible region is nonempty.
    pub fn new(rows: Vec<Halfspace>, query: Point, interior: &Point) -> Result<Self> {
        if rows.len() > QP_MAX_ROWS || query.dim() > QP_MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "qp oracle handles at most {QP_MAX_ROWS} rows in dimension {QP_MAX_DIM}"
            )));
        }
        for h in &rows {
            check_dim(query.dim(), h.dim())?;
        }
        check_dim(query.dim(), interior.dim())?;
        if rows.iter().any(|h| h.violation(interior) > 0.0) {
            return Err(Error::InfeasibleQp);
        }
        Ok(QpInstance { rows, query })
    }

    pub fn rows(&self) -> &[Halfspace] {
        &self.rows
    }

    pub fn query(&self) -> &Point {
        &self.query
    }
}

fn to_point(v: &DVector<f64>) -> Point {
    Point::from_vec(v.as_slice().to_vec())
}

/// Exact projection by active-set enumeration: every subset of rows is tried
/// as the active set, the equality-constrained least-distance problem is
/// solved, and the feasible candidate closest to the query wins.
pub fn qp_project(inst: &QpInstance) -> Result<Point> {
    let q = &inst.query;
    let rows: Vec<&Halfspace> = inst.rows.iter().filter(|h| !h.is_whole_space()).collect();
    let r = rows.len();
    let mut best: Option<(f64, Point)> = None;
    for mask in 0u32..(1 << r) {
        let active: Vec<&Halfspace> = (0..r)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| rows[i])
            .collect();
        let candidate = if active.is_empty() {
            q.clone()
        } else {
            let s = active.len();
            let gram = DMatrix::from_fn(s, s, |i, j| active[i].normal().dot(active[j].normal()));
            let eig = gram.clone().symmetric_eigen();
            let (lo, hi) = eig
                .eigenvalues
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if lo <= 1e-12 * hi {
                continue;
            }
            let rhs = DVector::from_fn(s, |i, _| active[i].violation(q));
            let Some(lambda) = gram.cholesky().map(|c| c.solve(&rhs)) else {
                continue;
            };
            let mut x = q.clone();
            for (i, h) in active.iter().enumerate() {
                x.add_scaled_mut(-lambda[i], h.normal());
            }
            x
        };
        let feasible = rows.iter().all(|h| {
            let scale = 1.0 + h.offset().abs() + h.normal().norm() * candidate.norm();
            h.violation(&candidate) <= 1e-10 * scale
        });
        if !feasible {
            continue;
        }
        let d = candidate.dist_sq(q);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, candidate));
        }
    }
    best.map(|(_, x)| x).ok_or(Error::InfeasibleQp)
}

/// Random instance for the pair projection: a halfspace `C` with normal `v`,
/// points `z ≠ w`, and a certified interior point of `C ∩ W_{z,w}`.
pub fn random_pair_instance(rng: &mut impl Rng, dim: usize) -> (Halfspace, Point, Point, Point) {
    let gauss = |rng: &mut dyn rand::RngCore| -> Point {
        Point::from_vec((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
    };
    loop {
        let z = gauss(rng);
        let w = gauss(rng);
        let v = gauss(rng);
        let d = w.sub(&z);
        if d.norm() < 1e-3 || v.norm() < 1e-3 {
            continue;
        }
        // p lies strictly inside W: ⟨p − z, d⟩ < 0.
        let noise = gauss(rng);
        let perp = noise.add_scaled(-noise.dot(&d) / d.norm_sq(), &d);
        let p = z
            .add_scaled(-rng.random_range(0.1..2.0) / d.norm(), &d)
            .add_scaled(rng.random_range(0.0..1.0), &perp);
        let b = v.dot(&p) + rng.random_range(0.01..1.0);
        let Ok(c) = Halfspace::new(v, b) else {
            continue;
        };
        return (c, z, w, p);
    }
}

/// `max_i |(f(x + h eᵢ) − f(x − h eᵢ))/(2h) − gᵢ|`. Meaningful only where
/// `f` is differentiable.
pub fn fd_subgradient_check(f: &dyn ConvexFunction, x: &Point, h: f64) -> f64 {
    let g = f.subgradient(x);
    (0..x.dim())
        .map(|i| {
            let e = Point::basis(x.dim(), i);
            let fd = (f.value(&x.add_scaled(h, &e)) - f.value(&x.add_scaled(-h, &e))) / (2.0 * h);
            (fd - g[i]).abs()
        })
        .fold(0.0, f64::max)
}

fn solve_dense(a: DMatrix<f64>, b: DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    let lu = a.full_piv_lu();
    let x = lu.solve(&b).ok_or(Error::Singular(what))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(what))
    }
}

fn quadratic(spec: &FunctionSpec) -> Result<(f64, Point)> {
    spec.as_quadratic()
        .ok_or_else(|| Error::Unsupported(format!("no closed form for {spec:?}")))
}

fn matrix_of(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// Solution of `Ax + b ∈ −N_P(x)` over `P = {Gx ≤ h}` by face enumeration:
/// each subset `S` of rows is taken as active, the KKT system
/// `Ax + b + G_Sᵀμ = 0`, `G_S x = h_S` is solved, and the first candidate
/// that is feasible with `μ ≥ 0` is returned.
pub fn affine_vi_polyhedron(a: &DMatrix<f64>, b: &Point, rows: &[Halfspace]) -> Result<Point> {
    let n = b.dim();
    let r = rows.len();
    if r > QP_MAX_ROWS {
        return Err(Error::Unsupported(format!(
            "face enumeration over {r} rows"
        )));
    }
    for mask in 0u32..(1 << r) {
        let active: Vec<&Halfspace> = (0..r)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &rows[i])
            .collect();
        let s = active.len();
        let mut kkt = DMatrix::zeros(n + s, n + s);
        kkt.view_mut((0, 0), (n, n)).copy_from(a);
        for (k, h) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + k)] = h.normal()[j];
                kkt[(n + k, j)] = h.normal()[j];
            }
        }
        let rhs = DVector::from_fn(
            n + s,
            |i, _| if i < n { -b[i] } else { active[i - n].offset() },
        );
        let Ok(sol) = solve_dense(kkt, rhs, "face system") else {
            continue;
        };
        let x = Point::from_vec(sol.as_slice()[..n].to_vec());
        let mu_ok = sol.as_slice()[n..].iter().all(|&m| m >= -1e-12);
        let feasible = rows
            .iter()
            .all(|h| h.violation(&x) <= 1e-10 * (1.0 + h.offset().abs()));
        if mu_ok && feasible {
            return Ok(x);
        }
    }
    Err(Error::Unsupported(
        "no face satisfied the KKT conditions".into(),
    ))
}

/// Grid minimiser of the natural residual `‖x − P_B(x − (Ax + b))‖` over a
/// 2-D box `B`, with grid spacing `step`.
pub fn grid_vi_2d(
    a: &DMatrix<f64>,
    b: &Point,
    lower: &Point,
    upper: &Point,
    step: f64,
) -> Result<Point> {
    check_dim(2, b.dim())?;
    let set = SetDescriptor::Box {
        lower: lower.clone(),
        upper: upper.clone(),
    };
    set.validate()?;
    let counts = |i: usize| ((upper[i] - lower[i]) / step).round() as usize;
    let mut best = (f64::INFINITY, Point::zeros(2));
    for i in 0..=counts(0) {
        let x0 = (lower[0] + i as f64 * step).min(upper[0]);
        for j in 0..=counts(1) {
            let x1 = (lower[1] + j as f64 * step).min(upper[1]);
            let ax0 = a[(0, 0)] * x0 + a[(0, 1)] * x1 + b[0];
            let ax1 = a[(1, 0)] * x0 + a[(1, 1)] * x1 + b[1];
            let p0 = (x0 - ax0).clamp(lower[0], upper[0]);
            let p1 = (x1 - ax1).clamp(lower[1], upper[1]);
            let res = (x0 - p0).hypot(x1 - p1);
            if res < best.0 {
                best = (res, Point::from_vec(vec![x0, x1]));
            }
        }
    }
    Ok(best.1)
}

fn polyhedron_data(recipe: &ProblemRecipe) -> Option<(DMatrix<f64>, Point, Vec<Halfspace>)> {
    let ProblemRecipe::AffinePolyhedron {
        matrix: Some(m),
        offset: Some(b),
        rows: Some(rows),
        ..
    } = recipe
    else {
        return None;
    };
    let rows = rows
        .iter()
        .map(|r| Halfspace::new(Point::from_vec(r.normal.clone()), r.offset))
        .collect::<Result<Vec<_>>>()
        .ok()?;
    Some((matrix_of(m), Point::from_vec(b.clone()), rows))
}

/// A solution of the problem computed in closed form from its recipe.
pub fn reference_solution(problem: &Problem) -> Result<Point> {
    let recipe = problem
        .recipe()
        .ok_or_else(|| Error::Unsupported(format!("problem {} has no recipe", problem.label())))?;
    match recipe {
        ProblemRecipe::QuadraticBall {
            target,
            center,
            radius,
            ..
        } => {
            let a = Point::new(target.clone())?;
            let c = center
                .clone()
                .map(Point::new)
                .transpose()?
                .unwrap_or_else(|| Point::zeros(a.dim()));
            exact_project(
                &SetDescriptor::Ball {
                    center: c,
                    radius: *radius,
                },
                &a,
            )
        }
        ProblemRecipe::AffinePolyhedron { .. } => {
            let (a, b, rows) = polyhedron_data(recipe)
                .ok_or_else(|| Error::Unsupported("unresolved polyhedron recipe".into()))?;
            affine_vi_polyhedron(&a, &b, &rows)
        }
        ProblemRecipe::A1 { target, center } => {
            // C = argmin ½‖x − c‖² = {c}.
            Ok(center
                .clone()
                .map(Point::new)
                .transpose()?
                .unwrap_or_else(|| Point::zeros(target.len())))
        }
        ProblemRecipe::A2 { map, phi1, phi2 } => {
            // (w₁LᵀL + w₂I)x = w₁Lᵀb₁ + w₂b₂, y = Lx.
            let (w1, b1) = quadratic(phi1)?;
            let (w2, b2) = quadratic(phi2)?;
            let l = matrix_of(map);
            let n = l.ncols();
            let lhs = l.tr_mul(&l) * w1 + DMatrix::identity(n, n) * w2;
            let rhs = l.tr_mul(&DVector::from_column_slice(b1.coords())) * w1
                + DVector::from_column_slice(b2.coords()) * w2;
            let x = solve_dense(lhs, rhs, "A2 normal equations")?;
            let y = &l * &x;
            Ok(to_point(&x).concat(&to_point(&y)))
        }
        ProblemRecipe::A3 { map, phi1, phi2 } => {
            // w₁(x₁ − b₁) + Lx₂ = 0 and w₂(x₂ − b₂) − Lx₁ = 0.
            let (w1, b1) = quadratic(phi1)?;
            let (w2, b2) = quadratic(phi2)?;
            let l = matrix_of(map);
            let n = l.ncols();
            let mut k = DMatrix::zeros(2 * n, 2 * n);
            k.view_mut((0, 0), (n, n))
                .copy_from(&(DMatrix::identity(n, n) * w1));
            k.view_mut((0, n), (n, n)).copy_from(&l);
            k.view_mut((n, 0), (n, n)).copy_from(&(-&l));
            k.view_mut((n, n), (n, n))
                .copy_from(&(DMatrix::identity(n, n) * w2));
            let rhs = DVector::from_fn(
                2 * n,
                |i, _| if i < n { w1 * b1[i] } else { w2 * b2[i - n] },
            );
            Ok(to_point(&solve_dense(k, rhs, "A3 stationarity system")?))
        }
    }
}

/// A random point of `C` for the recipe's constraint, or `None` when `C` is
/// a singleton handled elsewhere.
pub fn sample_feasible(recipe: &ProblemRecipe, rng: &mut impl Rng) -> Option<Point> {
    let mut uniform = |n: usize, r: f64| -> Point {
        Point::from_vec((0..n).map(|_| rng.random_range(-r..r)).collect())
    };
    match recipe {
        ProblemRecipe::QuadraticBall {
            target,
            center,
            radius,
            ..
        } => {
            let n = target.len();
            let c = center
                .clone()
                .map(Point::from_vec)
                .unwrap_or_else(|| Point::zeros(n));
            loop {
                let u = uniform(n, 1.0);
                if u.norm() <= 1.0 {
                    return Some(c.add_scaled(*radius, &u));
                }
            }
        }
        ProblemRecipe::AffinePolyhedron {
            dim,
            rows: Some(rows),
            ..
        } => {
            // Rejection from a growing cube; shipped polyhedra sit near the origin.
            for attempt in 0..10_000 {
                let x = uniform(*dim, 1.0 + (attempt / 100) as f64);
                if rows
                    .iter()
                    .all(|r| Point::from_vec(r.normal.clone()).dot(&x) <= r.offset)
                {
                    return Some(x);
                }
            }
            None
        }
        ProblemRecipe::AffinePolyhedron { .. } | ProblemRecipe::A1 { .. } => None,
        ProblemRecipe::A2 { map, .. } => {
            let l = matrix_of(map);
            let x = uniform(l.ncols(), 5.0);
            let y = &l * DVector::from_column_slice(x.coords());
            Some(x.concat(&to_point(&y)))
        }
        ProblemRecipe::A3 { map, .. } => Some(uniform(2 * map[0].len(), 5.0)),
    }
}

/// Smallest `⟨ū, x − x*⟩ / (1 + ‖x − x*‖)` over `samples` feasible points;
/// nonnegative (up to rounding) when the certificate proves `x*` solves the VI.
pub fn min_vi_gap(problem: &Problem, samples: usize, rng: &mut impl Rng) -> Result<f64> {
    let (Some(xs), Some(cert), Some(recipe)) = (
        problem.known_solution(),
        problem.certificate(),
        problem.recipe(),
    ) else {
        return Err(Error::Unsupported("problem carries no certificate".into()));
    };
    let mut u = Point::zeros(problem.dim());
    for p in cert {
        u.add_scaled_mut(1.0, p);
    }
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let Some(x) = sample_feasible(recipe, rng) else {
            return Ok(0.0);
        };
        let d = x.sub(xs);
        worst = worst.min(u.dot(&d) / (1.0 + d.norm()));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FejerReport {
    pub steps: usize,
    /// `(k, slack)` for every step with slack below `−1e−8`.
    pub violations: Vec<(usize, f64)>,
    pub min_slack: f64,
    /// Sum of the per-step bound terms over the run.
    pub bound_sum: f64,
    /// Share of `bound_sum` contributed by the second half of the run.
    pub tail_ratio: f64,
    /// The schedule is not square-summable or the bound terms show no decay.
    pub summability_flagged: bool,
}

impl FejerReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Recomputes the quasi-Fejér inequality
/// `‖z^{k+1} − x*‖² ≤ ‖zᵏ − x*‖² + m[(ηα)² + (m−1)η̄ηα²] + 2θ‖ū‖α²`
/// from trace snapshots, with `ηₖ` rebuilt from the stored `‖uᵢ‖`.
pub fn fejer_audit(
    trace: &[TraceRecord],
    problem: &Problem,
    schedule: &StepsizeSchedule,
    theta: f64,
) -> Result<FejerReport> {
    let xs = problem
        .known_solution()
        .ok_or_else(|| Error::Unsupported("fejer audit needs a known solution".into()))?;
    let (eta_bar, u_bar) = problem
        .certificate_norms()
        .ok_or_else(|| Error::Unsupported("fejer audit needs a certificate".into()))?;
    let m = problem.m();
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    let mut terms = Vec::with_capacity(trace.len());
    for rec in trace {
        let snap = rec.snapshot.as_ref().ok_or(Error::MissingSnapshots)?;
        let eta = snap.u_norms.iter().copied().fold(1.0, f64::max);
        let bound = fejer_increment(m, eta, rec.alpha_k, eta_bar, u_bar, theta);
        let slack = snap.z_prev.dist_sq(xs) + bound - snap.z_next.dist_sq(xs);
        if slack < -1e-8 {
            violations.push((rec.k, slack));
        }
        min_slack = min_slack.min(slack);
        terms.push(bound);
    }
    let bound_sum: f64 = terms.iter().sum();
    let tail: f64 = terms[terms.len() / 2..].iter().sum();
    let tail_ratio = if bound_sum > 0.0 {
        tail / bound_sum
    } else {
        0.0
    };
    Ok(FejerReport {
        steps: trace.len(),
        violations,
        min_slack,
        bound_sum,
        tail_ratio,
        summability_flagged: !schedule.rule().is_square_summable() || tail_ratio >= 0.25,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{project_halfspace, project_halfspace_pair};
    use crate::operators::{HalfSquaredDistance, LogSumExp, MaxAffine};
    use crate::problems::build;
    use crate::solver::{run, SolverOptions, StepRule};
    use crate::space::pt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hs(a: &[f64], b: f64) -> Halfspace {
        Halfspace::new(pt(a), b).unwrap()
    }

    #[test]
    fn qp_examples() {
        let one = QpInstance::new(
            vec![hs(&[1.0, 0.0], 0.0)],
            pt(&[2.0, 3.0]),
            &pt(&[-1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(qp_project(&one).unwrap(), pt(&[0.0, 3.0]));
        let corner = QpInstance::new(
            vec![hs(&[1.0, 0.0], 0.0), hs(&[0.0, 1.0], 0.0)],
            pt(&[1.0, 1.0]),
            &pt(&[-1.0, -1.0]),
        )
        .unwrap();
        assert!(qp_project(&corner).unwrap().norm() < 1e-15);
        assert!(QpInstance::new(vec![hs(&[1.0], 0.0)], pt(&[1.0]), &pt(&[1.0])).is_err());
        assert!(QpInstance::new(vec![], Point::zeros(6), &Point::zeros(6)).is_err());
    }

    #[test]
    fn qp_matches_pair_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..300 {
            let dim = 2 + trial % 4;
            let (c, z, w, p) = random_pair_instance(&mut rng, dim);
            let d = w.sub(&z);
            let cut = Halfspace::new(d.clone(), d.dot(&z)).unwrap();
            let inst = QpInstance::new(vec![c.clone(), cut], w.clone(), &p).unwrap();
            let expect = qp_project(&inst).unwrap();
            let got = project_halfspace_pair(&c, &z, &w).unwrap();
            assert!(
                got.dist(&expect) < 1e-8,
                "trial {trial}: {got:?} vs {expect:?}"
            );

            let single = QpInstance::new(vec![c.clone()], w.clone(), &p).unwrap();
            assert!(
                project_halfspace(&c, &w)
                    .unwrap()
                    .dist(&qp_project(&single).unwrap())
                    < 1e-10
            );
        }
    }

    #[test]
    fn fd_examples() {
        let q = HalfSquaredDistance::unit(pt(&[0.0, 0.0]));
        assert!(fd_subgradient_check(&q, &pt(&[1.0, 2.0]), 1e-6) < 1e-6);
        let aff = MaxAffine::affine(pt(&[3.0, -1.0]), 2.0).unwrap();
        assert!(fd_subgradient_check(&aff, &pt(&[0.3, 0.7]), 1e-6) < 1e-8);
        let lse = LogSumExp::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = Point::from_vec((0..3).map(|_| rng.random_range(-3.0..3.0)).collect());
            assert!(fd_subgradient_check(&lse, &x, 1e-6) < 1e-4);
        }
    }

    fn box_recipe() -> ProblemRecipe {
        ProblemRecipe::AffinePolyhedron {
            dim: 2,
            matrix: Some(vec![vec![0.1, 1.0], vec![-1.0, 0.1]]),
            offset: Some(vec![0.3, -0.5]),
            rows: None,
            slater: None,
            m: 1,
            seed: 0,
        }
    }

    #[test]
    fn box_vi_face_enumeration_matches_grid() {
        let p = build(&box_recipe()).unwrap();
        let xs = p.known_solution().unwrap().clone();
        let (a, b, _) = polyhedron_data(p.recipe().unwrap()).unwrap();
        let grid = grid_vi_2d(&a, &b, &pt(&[-1.0, -1.0]), &pt(&[1.0, 1.0]), 1e-3).unwrap();
        assert!(grid.dist(&xs) < 5e-3, "{grid:?} vs {xs:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(min_vi_gap(&p, 2000, &mut rng).unwrap() >= -1e-9);
    }

    #[test]
    fn reference_examples() {
        let p = build(&ProblemRecipe::QuadraticBall {
            target: vec![2.0, 0.0],
            m: 1,
            center: None,
            radius: 1.0,
        })
        .unwrap();
        assert_eq!(reference_solution(&p).unwrap(), pt(&[1.0, 0.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(min_vi_gap(&p, 1000, &mut rng).unwrap() >= -1e-12);
    }

    fn interior_ball() -> Problem {
        build(&ProblemRecipe::QuadraticBall {
            target: vec![0.3, -0.2],
            m: 2,
            center: None,
            radius: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn audit_interior_solution() {
        let p = interior_ball();
        let sched = StepsizeSchedule::Explicit(StepRule::Harmonic { scale: 1.0 });
        let mut opts = SolverOptions::new(2000);
        opts.snapshots = true;
        let out = run(&p, &sched, &opts, pt(&[3.0, 3.0])).unwrap();
        let report = fejer_audit(&out.state.trace, &p, &sched, opts.theta).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(!report.summability_flagged);
    }

    #[test]
    fn audit_flags_constant_steps() {
        let p = interior_ball();
        let sched = StepsizeSchedule::Explicit(StepRule::Constant { value: 0.5 });
        let mut opts = SolverOptions::new(500);
        opts.snapshots = true;
        let out = run(&p, &sched, &opts, pt(&[0.0, 0.0])).unwrap();
        let report = fejer_audit(&out.state.trace, &p, &sched, opts.theta).unwrap();
        assert!(report.passed());
        assert!(report.summability_flagged);
        assert!(report.tail_ratio > 0.4);
    }

    #[test]
    fn audit_needs_snapshots() {
        let p = interior_ball();
        let sched = StepsizeSchedule::Explicit(StepRule::Harmonic { scale: 1.0 });
        let out = run(&p, &sched, &SolverOptions::new(10), pt(&[0.0, 0.0])).unwrap();
        assert_eq!(
            fejer_audit(&out.state.trace, &p, &sched, 1.0).unwrap_err(),
            Error::MissingSnapshots
        );
    }

    #[test]
    fn audit_unconstrained_closed_form() {
        // z' − a = (1 − α)(z − a), so the slack is (1 − (1 − α)²)‖z − a‖² + (ηα)².
        let p = build(&ProblemRecipe::A3 {
            map: vec![vec![0.0]],
            phi1: FunctionSpec::HalfSquaredDistance {
                center: vec![1.0],
                weight: 1.0,
            },
            phi2: FunctionSpec::HalfSquaredDistance {
                center: vec![2.0],
                weight: 1.0,
            },
        })
        .unwrap();
        let sched = StepsizeSchedule::Explicit(StepRule::Harmonic { scale: 0.5 });
        let mut opts = SolverOptions::new(200);
        opts.snapshots = true;
        let out = run(&p, &sched, &opts, pt(&[4.0, -4.0])).unwrap();
        let report = fejer_audit(&out.state.trace, &p, &sched, 1.0).unwrap();
        assert!(report.passed());
        let r0 = &out.state.trace[0];
        let snap = r0.snapshot.as_ref().unwrap();
        let xs = p.known_solution().unwrap();
        let a = r0.alpha_k;
        let eta = snap.u_norms.iter().copied().fold(1.0, f64::max);
        let expected =
            (1.0 - (1.0 - a).powi(2)) * snap.z_prev.dist_sq(xs) + 2.0 * (eta * a).powi(2);
        assert!((r0.fejer_slack.unwrap() - expected).abs() < 1e-12);
    }
}
