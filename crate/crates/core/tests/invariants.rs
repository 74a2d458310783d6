use std::sync::Arc;

use proptest::prelude::*;
use relaxvi::constraints::{
    dist_upper, exact_project, project_halfspace, project_halfspace_pair, separator_at,
    ConstraintFunction, Halfspace, SetDescriptor,
};
use relaxvi::innerloop::{run_inner, DEFAULT_MAX_INNER};
use relaxvi::operators::{MaxAffine, SquaredBall};
use relaxvi::oracle::{qp_project, QpInstance};
use relaxvi::problems::{build, shipped, ProblemRecipe};
use relaxvi::solver::{
    outer_step, SolverOptions, SolverState, StepRule, StepSet, StepsizeSchedule,
};
use relaxvi::{pt, Point};

fn vec2() -> impl Strategy<Value = Point> {
    prop::collection::vec(-5.0f64..5.0, 2).prop_map(|v| pt(&v))
}

fn unit_ball() -> ConstraintFunction {
    ConstraintFunction::new(Arc::new(SquaredBall::unit(2)))
        .with_exact_set(SetDescriptor::Ball {
            center: Point::zeros(2),
            radius: 1.0,
        })
        .unwrap()
}

fn square() -> ConstraintFunction {
    let rows = vec![
        (pt(&[1.0, 0.0]), 1.0),
        (pt(&[-1.0, 0.0]), 1.0),
        (pt(&[0.0, 1.0]), 1.0),
        (pt(&[0.0, -1.0]), 1.0),
    ];
    ConstraintFunction::new(Arc::new(MaxAffine::new(rows).unwrap()))
        .with_slater(Point::zeros(2))
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn halfspace_projection_lands_inside(a in vec2(), b in -3.0f64..3.0, y in vec2()) {
        prop_assume!(a.norm() > 1e-3);
        let h = Halfspace::new(a, b).unwrap();
        let p = project_halfspace(&h, &y).unwrap();
        prop_assert!(h.violation(&p) <= 1e-12 * (1.0 + b.abs() + p.norm()));
        prop_assert!(project_halfspace(&h, &p).unwrap().dist(&p) <= 1e-12);
    }

    #[test]
    fn pair_projection_matches_qp(a in vec2(), z in vec2(), step in vec2()) {
        prop_assume!(a.norm() > 0.1 && step.norm() > 0.1);
        // C contains z, w lies outside the cut {⟨w − z, x − z⟩ ≤ 0}.
        let c = Halfspace::new(a.clone(), a.dot(&z) + 1.0).unwrap();
        let w = z.add(&step);
        let d = w.sub(&z);
        let cut = Halfspace::new(d.clone(), d.dot(&z)).unwrap();
        let interior = z.sub(&d.scale(0.5 / d.norm())).sub(&a.scale(0.5 / a.norm()));
        prop_assume!(c.violation(&interior) < -1e-3 && cut.violation(&interior) < -1e-3);
        let expect = qp_project(&QpInstance::new(vec![c.clone(), cut], w.clone(), &interior).unwrap()).unwrap();
        let got = project_halfspace_pair(&c, &z, &w).unwrap();
        prop_assert!(got.dist(&expect) <= 1e-8 * (1.0 + expect.norm()));
    }

    #[test]
    fn separator_keeps_the_feasible_set(y in vec2(), x in vec2()) {
        for cf in [unit_ball(), square()] {
            let h = separator_at(&cf, &y).unwrap();
            if cf.value(&x) <= 0.0 {
                prop_assert!(h.violation(&x) <= 1e-12);
            }
        }
    }

    #[test]
    fn dist_upper_bounds_the_exact_distance(y in vec2()) {
        let cf = unit_ball();
        let exact = y.dist(&exact_project(cf.exact_set().unwrap(), &y).unwrap());
        prop_assert!(dist_upper(&cf, &y).unwrap() >= exact);
        let box_dist = exact_project(
            &SetDescriptor::Box { lower: pt(&[-1.0, -1.0]), upper: pt(&[1.0, 1.0]) },
            &y,
        ).unwrap().dist(&y);
        prop_assert!(dist_upper(&square(), &y).unwrap() >= box_dist - 1e-12);
    }

    #[test]
    fn inner_loop_is_fejer(z in vec2(), x in vec2(), log_alpha in -2.0f64..0.0) {
        for cf in [unit_ball(), square()] {
            if cf.value(&z) <= 0.0 {
                continue;
            }
            let alpha = 10f64.powf(log_alpha);
            let r = run_inner(&cf, &z, 1.0, alpha, DEFAULT_MAX_INNER).unwrap();
            prop_assert!(dist_upper(&cf, &r.z0).unwrap() <= alpha);
            if cf.value(&x) <= 0.0 {
                prop_assert!(r.z0.dist(&x) <= z.dist(&x) + 1e-9);
            }
            prop_assert!(r.sep.violation(&r.z0) <= 1e-9);
        }
    }

    #[test]
    fn ball_steps_keep_the_cycle_in_the_step_set(
        target in vec2(),
        x0 in vec2(),
        m in 1usize..5,
        steps in 1usize..40,
    ) {
        let recipe = ProblemRecipe::QuadraticBall { target: target.into_vec(), m, center: None, radius: 1.0 };
        let problem = build(&recipe).unwrap();
        let sched = StepsizeSchedule::Explicit(StepRule::Power { scale: 1.0, exponent: 0.7 });
        let opts = SolverOptions::new(steps);
        let mut state = SolverState::new(x0);
        let mut weighted = Point::zeros(2);
        for _ in 0..steps {
            let r = outer_step(&problem, &sched, &opts, &mut state).unwrap();
            for z in &r.cycle {
                let d = match &r.step_set {
                    StepSet::Halfspace(h) => h.distance(z),
                    StepSet::Exact(s) => s.distance(z).unwrap(),
                };
                prop_assert!(d <= 1e-9);
            }
            weighted = weighted.add_scaled(r.alpha, r.cycle.last().unwrap());
        }
        prop_assert!(weighted.scale(1.0 / state.sigma).dist(&state.x) <= 1e-12 * (1.0 + state.x.norm()));
    }
}

#[test]
fn every_shipped_family_builds_with_a_solution() {
    for (name, recipe, x0) in shipped() {
        let problem = build(&recipe).unwrap();
        assert_eq!(problem.dim(), x0.dim(), "{name}");
        let xs = problem
            .known_solution()
            .unwrap_or_else(|| panic!("{name} has no solution"));
        assert!(problem.constraint().value(xs) <= 1e-9, "{name}");
        assert!(problem.certificate().is_some(), "{name}");
    }
}
