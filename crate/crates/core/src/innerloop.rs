//! Inner loop: moves an infeasible point close to `C` without projecting
//! onto `C`.
//!
//! Starting from `y⁰ = z`, each step builds the separator `C_j` at `y^j` and
//! the cut `W_j = {x : ⟨x − y^j, y⁰ − y^j⟩ ≤ 0}`, then sets
//! `y^{j+1} = P_{C_j ∩ W_j}(y⁰)`. The loop stops at the first `j` with
//! `dist_upper(y^{j+1}) ≤ θα`. Every iterate is a projection of `y⁰` onto a
//! superset of `C`, so `‖y^{j+1} − x‖ ≤ ‖z − x‖` for every `x ∈ C`.

use crate::constraints::{
    dist_upper, project_halfspace_pair, separator_at, ConstraintFunction, Halfspace,
};
use crate::error::{check_dim, Error, Result};
use crate::space::Point;

pub const DEFAULT_MAX_INNER: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct InnerResult {
    /// Output point, the start of the next splitting cycle.
    pub z0: Point,
    /// Halfspace the cycle projects onto; contains `C` and `z0`.
    pub sep: Halfspace,
    pub iterations: usize,
    pub dist_bound_at_exit: f64,
}

pub fn run_inner(
    cf: &ConstraintFunction,
    z: &Point,
    theta: f64,
    alpha: f64,
    max_iter: usize,
) -> Result<InnerResult> {
    check_dim(cf.dim(), z.dim())?;
    if !(theta > 0.0 && theta.is_finite()) || !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "inner loop needs theta > 0 and alpha > 0, got theta = {theta}, alpha = {alpha}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument(
            "inner loop needs max_iter >= 1".into(),
        ));
    }
    let cz = cf.value(z);
    if cz <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "inner loop needs an infeasible start, got c(z) = {cz}"
        )));
    }

    let target = theta * alpha;
    let y0 = z;
    let mut y = z.clone();
    let mut j = 0;
    loop {
        let sep = separator_at(cf, &y)?;
        // W_0 is the whole space since y⁰ = y^0.
        let next = project_halfspace_pair(&sep, &y, y0)?;
        if !next.is_finite() {
            return Err(Error::NonFinite("inner loop iterate"));
        }
        j += 1;
        let bound = dist_upper(cf, &next)?;
        if bound <= target {
            return Ok(InnerResult {
                z0: next,
                sep,
                iterations: j,
                dist_bound_at_exit: bound,
            });
        }
        if j >= max_iter {
            return Err(Error::IterationBudgetExceeded {
                iterations: j,
                dist_bound: bound,
                target,
            });
        }
        y = next;
    }
}

/// Step taken when `c(z) ≤ 0`: `z0 = z` and the halfspace is
/// `{x : ⟨g, x − z⟩ ≤ 0}` with `g ∈ ∂c⁺(z)`. Strictly inside, `∂c⁺ = {0}` and
/// the halfspace is the whole space; on the boundary `g` is the oracle's
/// subgradient of `c`.
pub fn feasible_shortcut(cf: &ConstraintFunction, z: &Point) -> Result<InnerResult> {
    check_dim(cf.dim(), z.dim())?;
    let cz = cf.value(z);
    if cz > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "feasible shortcut needs c(z) <= 0, got {cz}"
        )));
    }
    let sep = if cz < 0.0 {
        Halfspace::whole(z.dim())
    } else {
        let g = cf.subgradient(z);
        let offset = g.dot(z);
        Halfspace::new(g, offset)?
    };
    Ok(InnerResult {
        z0: z.clone(),
        sep,
        iterations: 0,
        dist_bound_at_exit: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::SetDescriptor;
    use crate::operators::{MaxAffine, SquaredBall};
    use crate::space::pt;
    use std::sync::Arc;

    fn unit_ball_exact() -> ConstraintFunction {
        ConstraintFunction::new(Arc::new(SquaredBall::unit(2)))
            .with_exact_set(SetDescriptor::Ball {
                center: pt(&[0.0, 0.0]),
                radius: 1.0,
            })
            .unwrap()
    }

    #[test]
    fn ball_trace_from_three() {
        let cf = unit_ball_exact();
        let r = run_inner(&cf, &pt(&[3.0, 0.0]), 1.0, 0.5, 100).unwrap();
        // First step lands on x1 = 5/3 (distance 2/3 > 0.5), so at least two steps.
        assert!(r.iterations >= 2);
        assert!(r.dist_bound_at_exit <= 0.5);
        assert!(r.sep.contains(&r.z0, 1e-9));
        // Along the axis the iterates follow r ↦ (r² + 1)/(2r).
        assert!(r.z0.max_abs_diff(&pt(&[17.0 / 15.0, 0.0])) < 1e-12);

        let one = run_inner(&cf, &pt(&[3.0, 0.0]), 1.0, 0.7, 100).unwrap();
        assert_eq!(one.iterations, 1);
        assert!(one.z0.max_abs_diff(&pt(&[5.0 / 3.0, 0.0])) < 1e-14);
        assert_eq!(one.sep.normal(), &pt(&[6.0, 0.0]));
    }

    #[test]
    fn affine_constraint_one_step() {
        let cf =
            ConstraintFunction::new(Arc::new(MaxAffine::affine(pt(&[1.0, 0.0]), 0.0).unwrap()))
                .with_surrogate(1.0)
                .unwrap();
        for theta_alpha in [1e-6, 0.1, 10.0] {
            let r = run_inner(&cf, &pt(&[2.0, 3.0]), 1.0, theta_alpha, 10).unwrap();
            assert_eq!(r.iterations, 1);
            assert_eq!(r.z0, pt(&[0.0, 3.0]));
        }
    }

    #[test]
    fn preconditions() {
        let cf = unit_ball_exact();
        assert!(run_inner(&cf, &pt(&[0.0, 0.0]), 1.0, 1.0, 10).is_err());
        assert!(run_inner(&cf, &pt(&[2.0, 0.0]), 0.0, 1.0, 10).is_err());
        assert!(run_inner(&cf, &pt(&[2.0, 0.0]), 1.0, -1.0, 10).is_err());
        assert!(run_inner(&cf, &pt(&[2.0, 0.0]), 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn budget_exceeded() {
        let cf = unit_ball_exact();
        let err = run_inner(&cf, &pt(&[100.0, 0.0]), 1.0, 1e-12, 3).unwrap_err();
        assert!(matches!(
            err,
            Error::IterationBudgetExceeded { iterations: 3, .. }
        ));
    }

    #[test]
    fn shortcut_examples() {
        let cf = unit_ball_exact();
        let r = feasible_shortcut(&cf, &pt(&[0.0, 0.0])).unwrap();
        assert!(r.sep.is_whole_space());
        assert_eq!(r.z0, pt(&[0.0, 0.0]));
        assert_eq!(r.iterations, 0);

        let r = feasible_shortcut(&cf, &pt(&[1.0, 0.0])).unwrap();
        assert_eq!(r.sep.normal(), &pt(&[2.0, 0.0]));
        assert_eq!(r.sep.offset(), 2.0);

        let aff =
            ConstraintFunction::new(Arc::new(MaxAffine::affine(pt(&[1.0, 0.0]), 0.0).unwrap()));
        let r = feasible_shortcut(&aff, &pt(&[0.0, 5.0])).unwrap();
        assert_eq!(r.sep.normal(), &pt(&[1.0, 0.0]));
        assert_eq!(r.sep.offset(), 0.0);

        assert!(feasible_shortcut(&cf, &pt(&[2.0, 0.0])).is_err());
    }
}
