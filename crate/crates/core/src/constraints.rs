//! The feasible set `C = {x : c(x) ≤ 0}`.
//!
//! Exact projections onto `C` are replaced by projections onto halfspaces
//! that contain it. This module provides the separating halfspace at a point,
//! closed-form projections onto one halfspace and onto the intersection of a
//! separator with a cutting halfspace, and computable upper bounds on
//! `dist(y, C)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::operators::{LinearMap, SharedFunction};
use crate::space::Point;

/// `{x : ⟨a, x⟩ ≤ b}`. A zero normal with `b ≥ 0` is the whole space.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    normal: Point,
    offset: f64,
}

impl Halfspace {
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::NonFinite("halfspace offset"));
        }
        if normal.is_zero() && offset < 0.0 {
            return Err(Error::EmptyHalfspace(offset));
        }
        Ok(Halfspace { normal, offset })
    }

    pub fn whole(dim: usize) -> Self {
        Halfspace {
            normal: Point::zeros(dim),
            offset: 0.0,
        }
    }

    pub fn normal(&self) -> &Point {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    pub fn is_whole_space(&self) -> bool {
        self.normal.is_zero()
    }

    /// `⟨a, x⟩ − b`; positive outside.
    pub fn violation(&self, x: &Point) -> f64 {
        self.normal.dot(x) - self.offset
    }

    /// Euclidean distance from `x` to the halfspace.
    pub fn distance(&self, x: &Point) -> f64 {
        if self.is_whole_space() {
            return 0.0;
        }
        self.violation(x).max(0.0) / self.normal.norm()
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.distance(x) <= tol
    }

    fn project(&self, y: &Point) -> Point {
        let nn = self.normal.norm_sq();
        if nn == 0.0 {
            return y.clone();
        }
        let ay = self.normal.dot(y);
        let excess = ay - self.offset;
        // Points produced by a previous projection onto this halfspace may
        // sit a few ulps outside; leave them alone so projection is idempotent.
        let slack = 4.0 * f64::EPSILON * (ay.abs() + self.offset.abs());
        if excess <= slack {
            y.clone()
        } else {
            y.add_scaled(-excess / nn, &self.normal)
        }
    }
}

/// Sets with a cheap exact Euclidean projection.
#[derive(Clone, Debug, PartialEq)]
pub enum SetDescriptor {
    WholeSpace {
        dim: usize,
    },
    Halfspace(Halfspace),
    Ball {
        center: Point,
        radius: f64,
    },
    Box {
        lower: Point,
        upper: Point,
    },
    /// `{(x, y) : Lx = y}` in the product space, points laid out as `(x, y)`.
    Graph(LinearMap),
}

impl SetDescriptor {
    pub fn dim(&self) -> usize {
        match self {
            SetDescriptor::WholeSpace { dim } => *dim,
            SetDescriptor::Halfspace(h) => h.dim(),
            SetDescriptor::Ball { center, .. } => center.dim(),
            SetDescriptor::Box { lower, .. } => lower.dim(),
            SetDescriptor::Graph(l) => l.rows() + l.cols(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SetDescriptor::Ball { radius, .. } if !(radius.is_finite() && *radius >= 0.0) => Err(
                Error::InvalidArgument(format!("ball radius must be >= 0, got {radius}")),
            ),
            SetDescriptor::Box { lower, upper } => {
                check_dim(lower.dim(), upper.dim())?;
                if lower
                    .coords()
                    .iter()
                    .zip(upper.coords())
                    .any(|(l, u)| l > u)
                {
                    return Err(Error::InvalidArgument("box has lower > upper".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Distance from `y` to the set, through the exact projection.
    pub fn distance(&self, y: &Point) -> Result<f64> {
        Ok(y.dist(&exact_project(self, y)?))
    }
}

/// Exact Euclidean projection onto a set with a closed form.
pub fn exact_project(set: &SetDescriptor, y: &Point) -> Result<Point> {
    check_dim(set.dim(), y.dim())?;
    Ok(match set {
        SetDescriptor::WholeSpace { .. } => y.clone(),
        SetDescriptor::Halfspace(h) => h.project(y),
        SetDescriptor::Ball { center, radius } => {
            let d = y.sub(center);
            let n = d.norm();
            if n <= *radius {
                y.clone()
            } else {
                center.add_scaled(radius / n, &d)
            }
        }
        SetDescriptor::Box { lower, upper } => Point::from_vec(
            y.coords()
                .iter()
                .zip(lower.coords().iter().zip(upper.coords()))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
        ),
        SetDescriptor::Graph(l) => project_onto_graph(l, y)?,
    })
}

/// argmin ‖x − x₀‖² + ‖Lx − y₀‖², i.e. `(I + LᵀL) x = x₀ + Lᵀy₀`, `y = Lx`.
fn project_onto_graph(l: &LinearMap, z: &Point) -> Result<Point> {
    let (n, p) = (l.cols(), l.rows());
    let (x0, y0) = (z.slice(0, n), z.slice(n, p));
    let m = l.matrix();
    let gram = DMatrix::identity(n, n) + m.tr_mul(m);
    let rhs = x0.add(&l.mul_transpose(&y0));
    let chol = gram
        .cholesky()
        .ok_or(Error::Singular("graph projection normal equations"))?;
    let x = chol.solve(&DVector::from_column_slice(rhs.coords()));
    let x = Point::from_vec(x.as_slice().to_vec());
    let y = l.mul(&x);
    Ok(x.concat(&y))
}

/// One projection of `z` onto the linearisation of `½‖Lx − y‖²` at `z`:
/// `z − c(z)·∇c(z)/‖∇c(z)‖²`.
///
/// For a squared residual the linearisation meets zero only halfway to the
/// graph along the gradient, so this is not the projection onto the graph in
/// general (see the tests). It is kept for comparison against
/// [`exact_project`].
pub fn linearized_graph_step(l: &LinearMap, z: &Point) -> Result<Point> {
    check_dim(l.rows() + l.cols(), z.dim())?;
    let (n, p) = (l.cols(), l.rows());
    let r = l.mul(&z.slice(0, n)).sub(&z.slice(n, p));
    let value = 0.5 * r.norm_sq();
    let grad = l.mul_transpose(&r).concat(&r.scale(-1.0));
    let gg = grad.norm_sq();
    if gg == 0.0 {
        return Ok(z.clone());
    }
    Ok(z.add_scaled(-value / gg, &grad))
}

/// How [`dist_upper`] bounds the distance to `C` outside it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistMode {
    /// Through an exact projection onto a known set equal to `C`.
    Exact,
    /// `κ·c⁺(x)`, a user-supplied error bound.
    Surrogate,
    /// The Slater-point bound `‖y − w‖·c(y)/(c(y) − c(w))`.
    Slater,
}

/// The constraint `c(x) ≤ 0` with the information needed to bound distances.
#[derive(Clone, Debug)]
pub struct ConstraintFunction {
    function: SharedFunction,
    exact: Option<SetDescriptor>,
    surrogate: Option<f64>,
    slater: Option<(Point, f64)>,
}

impl ConstraintFunction {
    pub fn new(function: SharedFunction) -> Self {
        ConstraintFunction {
            function,
            exact: None,
            surrogate: None,
            slater: None,
        }
    }

    /// Declares that `C` equals `set`. Distances and, on the exact path,
    /// projections then use the closed form.
    pub fn with_exact_set(mut self, set: SetDescriptor) -> Result<Self> {
        check_dim(self.dim(), set.dim())?;
        set.validate()?;
        self.exact = Some(set);
        Ok(self)
    }

    /// Error bound `dist(x, C) ≤ factor·max(0, c(x))`.
    pub fn with_surrogate(mut self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Config(format!(
                "surrogate factor must be > 0, got {factor}"
            )));
        }
        self.surrogate = Some(factor);
        Ok(self)
    }

    pub fn with_slater(mut self, w: Point) -> Result<Self> {
        check_dim(self.dim(), w.dim())?;
        let cw = self.function.value(&w);
        if cw >= 0.0 {
            return Err(Error::Config(format!(
                "Slater point must satisfy c(w) < 0, got c(w) = {cw}"
            )));
        }
        self.slater = Some((w, cw));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }

    pub fn function(&self) -> &SharedFunction {
        &self.function
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.function.value(x)
    }

    pub fn subgradient(&self, x: &Point) -> Point {
        self.function.subgradient(x)
    }

    pub fn exact_set(&self) -> Option<&SetDescriptor> {
        self.exact.as_ref()
    }

    pub fn slater_point(&self) -> Option<&Point> {
        self.slater.as_ref().map(|(w, _)| w)
    }

    /// The rule [`dist_upper`] uses: exact, then surrogate, then Slater.
    pub fn dist_mode(&self) -> Option<DistMode> {
        if self.exact.is_some() {
            Some(DistMode::Exact)
        } else if self.surrogate.is_some() {
            Some(DistMode::Surrogate)
        } else if self.slater.is_some() {
            Some(DistMode::Slater)
        } else {
            None
        }
    }

    pub fn exact_project(&self, y: &Point) -> Result<Point> {
        match &self.exact {
            Some(set) => exact_project(set, y),
            None => Err(Error::Unsupported(format!(
                "no exact projection for constraint {}",
                self.function.label()
            ))),
        }
    }
}

/// `{x : c(y) + ⟨g, x − y⟩ ≤ 0}` with `g ∈ ∂c(y)`, stored as
/// `{x : ⟨g, x⟩ ≤ ⟨g, y⟩ − c(y)}`. Contains `C` by the subgradient inequality.
pub fn separator_at(cf: &ConstraintFunction, y: &Point) -> Result<Halfspace> {
    check_dim(cf.dim(), y.dim())?;
    let value = cf.value(y);
    let g = cf.subgradient(y);
    if g.is_zero() {
        if value > 0.0 {
            return Err(Error::InfeasibleConstraint { value });
        }
        return Ok(Halfspace::whole(y.dim()));
    }
    let offset = g.dot(y) - value;
    Halfspace::new(g, offset)
}

/// `y − max{0, (⟨a, y⟩ − b)/‖a‖²}·a`
pub fn project_halfspace(h: &Halfspace, y: &Point) -> Result<Point> {
    check_dim(h.dim(), y.dim())?;
    Ok(h.project(y))
}

/// Projection of `w` onto `C_z ∩ W_{z,w}`, where `C_z` is the separator built
/// at `z` and `W_{z,w} = {x : ⟨x − z, w − z⟩ ≤ 0}`.
///
/// Since `P_W(w) = z`, the projection is either `P_{C_z}(w)` when that point
/// lies in `W`, or the point `w + λ₁v + λ₂(w − z)` on both boundaries, with
/// `(λ₁, λ₂)` solving
///
/// ```text
/// λ₁‖v‖²       + λ₂⟨v, w−z⟩ = −⟨v, w−z⟩ − c(z)
/// λ₁⟨v, w−z⟩  + λ₂‖w−z‖²  = −‖w−z‖²
/// ```
///
/// In the two-boundary case `λ₁ ≤ 0`, so `λ₁` is used unclamped.
///
/// Degenerate inputs: `w = z` gives `P_{C_z}(w)`; when `v` is parallel to
/// `w − z` the result is `P_{C_z}(P_W(w))`, checked for membership in both.
pub fn project_halfspace_pair(csep: &Halfspace, z: &Point, w: &Point) -> Result<Point> {
    check_dim(csep.dim(), z.dim())?;
    check_dim(z.dim(), w.dim())?;
    let d = w.sub(z);
    let dd = d.norm_sq();
    if dd == 0.0 {
        return Ok(csep.project(w));
    }
    let cut = Halfspace {
        normal: d.clone(),
        offset: d.dot(z),
    };
    let p = csep.project(w);
    if cut.violation(&p) <= 0.0 {
        return Ok(p);
    }

    if csep.violation(z) <= 0.0 {
        // P_W(w) = z already lies in C_z.
        return Ok(z.clone());
    }

    let v = csep.normal();
    let vv = v.norm_sq();
    let vd = v.dot(&d);
    let det = vv * dd - vd * vd;
    if vv > 0.0 && det > 1e-12 * vv * dd {
        // c(z) = ⟨v, z⟩ − b for a separator built at z.
        let cz = v.dot(z) - csep.offset();
        let r1 = -vd - cz;
        let r2 = -dd;
        let l1 = (r1 * dd - vd * r2) / det;
        let l2 = (vv * r2 - vd * r1) / det;
        let x = w.add_scaled(l1, v).add_scaled(l2, &d);
        return Ok(x);
    }

    // Parallel normals: the intersection is bounded by the tighter of the two
    // or is a slab; P_W(w) = z followed by P_{C_z} resolves both cases.
    let q = csep.project(z);
    let tol = 1e-9 * (1.0 + q.norm());
    if csep.contains(&q, tol) && cut.contains(&q, tol) {
        Ok(q)
    } else {
        Err(Error::InfeasibleConstraint {
            value: csep.violation(z),
        })
    }
}

/// Upper bound on `dist(y, C)`; zero when `c(y) ≤ 0`.
pub fn dist_upper(cf: &ConstraintFunction, y: &Point) -> Result<f64> {
    check_dim(cf.dim(), y.dim())?;
    let cy = cf.value(y);
    if cy <= 0.0 {
        return Ok(0.0);
    }
    if let Some(set) = &cf.exact {
        return set.distance(y);
    }
    if let Some(k) = cf.surrogate {
        return Ok(k * cy);
    }
    if let Some((w, cw)) = &cf.slater {
        return Ok(y.dist(w) * cy / (cy - cw));
    }
    Err(Error::Config(format!(
        "constraint {} has no distance rule (exact set, surrogate or Slater point)",
        cf.function.label()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{MaxAffine, NormBall, SquaredBall};
    use crate::space::pt;
    use std::sync::Arc;

    fn unit_sq_ball() -> ConstraintFunction {
        ConstraintFunction::new(Arc::new(SquaredBall::unit(2)))
    }

    #[test]
    fn separator_examples() {
        let h = separator_at(&unit_sq_ball(), &pt(&[3.0, 0.0])).unwrap();
        assert_eq!(h.normal(), &pt(&[6.0, 0.0]));
        assert_eq!(h.offset(), 10.0);

        let aff =
            ConstraintFunction::new(Arc::new(MaxAffine::affine(pt(&[1.0, 2.0]), 3.0).unwrap()));
        for y in [pt(&[5.0, 5.0]), pt(&[-1.0, 0.0])] {
            let h = separator_at(&aff, &y).unwrap();
            assert_eq!(h.normal(), &pt(&[1.0, 2.0]));
            assert!((h.offset() - 3.0).abs() < 1e-14);
        }

        let h = separator_at(&unit_sq_ball(), &pt(&[0.0, 0.0])).unwrap();
        assert!(h.is_whole_space());
    }

    #[test]
    fn separator_zero_gradient_outside_is_infeasible() {
        let empty = ConstraintFunction::new(Arc::new(crate::operators::Constant::new(2, 1.0)));
        assert!(matches!(
            separator_at(&empty, &pt(&[0.0, 0.0])),
            Err(Error::InfeasibleConstraint { .. })
        ));
    }

    #[test]
    fn halfspace_rejects_empty() {
        assert!(Halfspace::new(pt(&[0.0, 0.0]), -1.0).is_err());
        assert!(Halfspace::new(pt(&[0.0, 0.0]), 0.0)
            .unwrap()
            .is_whole_space());
    }

    #[test]
    fn project_halfspace_examples() {
        let h = Halfspace::new(pt(&[1.0, 0.0]), 0.0).unwrap();
        assert_eq!(
            project_halfspace(&h, &pt(&[2.0, 3.0])).unwrap(),
            pt(&[0.0, 3.0])
        );
        assert_eq!(
            project_halfspace(&h, &pt(&[-1.0, 2.0])).unwrap(),
            pt(&[-1.0, 2.0])
        );
        let diag = Halfspace::new(pt(&[1.0, 1.0]), 1.0).unwrap();
        assert_eq!(
            project_halfspace(&diag, &pt(&[1.0, 1.0])).unwrap(),
            pt(&[0.5, 0.5])
        );
    }

    #[test]
    fn pair_projection_degenerate_base_point() {
        let h = Halfspace::new(pt(&[1.0, 0.0]), 1.0).unwrap();
        let w = pt(&[3.0, 2.0]);
        assert_eq!(project_halfspace_pair(&h, &w, &w).unwrap(), pt(&[1.0, 2.0]));
    }

    #[test]
    fn pair_projection_two_active() {
        // c(x) = x1 - 1, z = (2, 0), w = (3, 2). Both boundaries are active:
        // x1 = 1 and x1 + 2 x2 = 2, giving (1, 0.5).
        let cf =
            ConstraintFunction::new(Arc::new(MaxAffine::affine(pt(&[1.0, 0.0]), 1.0).unwrap()));
        let z = pt(&[2.0, 0.0]);
        let h = separator_at(&cf, &z).unwrap();
        let p = project_halfspace_pair(&h, &z, &pt(&[3.0, 2.0])).unwrap();
        assert!(p.max_abs_diff(&pt(&[1.0, 0.5])) < 1e-14);
    }

    #[test]
    fn pair_projection_parallel_normals() {
        // Separator and cut share a normal direction: the tighter one binds.
        let z = pt(&[2.0, 0.0]);
        let w = pt(&[3.0, 0.0]);
        let h = Halfspace::new(pt(&[1.0, 0.0]), 5.0).unwrap();
        let p = project_halfspace_pair(&h, &z, &w).unwrap();
        assert_eq!(p, z);
        // Opposite directions forming a slab [-1, 2] along x1.
        let h = Halfspace::new(pt(&[-1.0, 0.0]), 1.0).unwrap();
        let p = project_halfspace_pair(&h, &z, &pt(&[4.0, 0.0])).unwrap();
        assert_eq!(p, z);
    }

    #[test]
    fn dist_upper_examples() {
        let ball = ConstraintFunction::new(Arc::new(NormBall::new(pt(&[0.0, 0.0]), 1.0).unwrap()))
            .with_exact_set(SetDescriptor::Ball {
                center: pt(&[0.0, 0.0]),
                radius: 1.0,
            })
            .unwrap();
        assert_eq!(dist_upper(&ball, &pt(&[3.0, 0.0])).unwrap(), 2.0);
        assert_eq!(dist_upper(&ball, &pt(&[0.5, 0.0])).unwrap(), 0.0);

        let slater = unit_sq_ball().with_slater(pt(&[0.0, 0.0])).unwrap();
        let b = dist_upper(&slater, &pt(&[2.0, 0.0])).unwrap();
        assert_eq!(b, 1.5);
        assert!(b >= 1.0);
        assert_eq!(slater.dist_mode(), Some(DistMode::Slater));
    }

    #[test]
    fn slater_point_must_be_strictly_feasible() {
        assert!(matches!(
            unit_sq_ball().with_slater(pt(&[1.0, 0.0])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dist_mode_precedence() {
        let cf = unit_sq_ball()
            .with_slater(pt(&[0.0, 0.0]))
            .unwrap()
            .with_surrogate(0.5)
            .unwrap();
        assert_eq!(cf.dist_mode(), Some(DistMode::Surrogate));
        // (‖y‖² − 1)/2 = 1.5 at y = (2, 0)
        assert_eq!(dist_upper(&cf, &pt(&[2.0, 0.0])).unwrap(), 1.5);
        let cf = cf
            .with_exact_set(SetDescriptor::Ball {
                center: pt(&[0.0, 0.0]),
                radius: 1.0,
            })
            .unwrap();
        assert_eq!(cf.dist_mode(), Some(DistMode::Exact));
        assert_eq!(dist_upper(&cf, &pt(&[2.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn missing_distance_rule_is_an_error() {
        assert!(dist_upper(&unit_sq_ball(), &pt(&[2.0, 0.0])).is_err());
        assert_eq!(dist_upper(&unit_sq_ball(), &pt(&[0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn exact_project_examples() {
        let ball = SetDescriptor::Ball {
            center: pt(&[0.0, 0.0]),
            radius: 1.0,
        };
        assert_eq!(
            exact_project(&ball, &pt(&[0.0, 2.0])).unwrap(),
            pt(&[0.0, 1.0])
        );
        let bx = SetDescriptor::Box {
            lower: pt(&[0.0, 0.0]),
            upper: pt(&[1.0, 1.0]),
        };
        assert_eq!(
            exact_project(&bx, &pt(&[2.0, -1.0])).unwrap(),
            pt(&[1.0, 0.0])
        );
        let graph = SetDescriptor::Graph(LinearMap::identity(1));
        let p = exact_project(&graph, &pt(&[2.0, 0.0])).unwrap();
        assert!(p.max_abs_diff(&pt(&[1.0, 1.0])) < 1e-14);
        assert!(exact_project(&ball, &pt(&[1.0])).is_err());
    }

    #[test]
    fn linearized_graph_step_is_not_the_graph_projection() {
        // On K = {(t, t)}, the exact projection of (2, 0) is (1, 1) while the
        // linearised step lands halfway, at (1.5, 0.5). The step coincides with
        // the separator projection of the squared residual at the same point.
        let l = LinearMap::identity(1);
        let z = pt(&[2.0, 0.0]);
        let step = linearized_graph_step(&l, &z).unwrap();
        assert!(step.max_abs_diff(&pt(&[1.5, 0.5])) < 1e-14);
        let exact = exact_project(&SetDescriptor::Graph(l.clone()), &z).unwrap();
        assert!(exact.max_abs_diff(&pt(&[1.0, 1.0])) < 1e-14);
        assert!(step.dist(&exact) > 0.7);

        let cf = ConstraintFunction::new(Arc::new(crate::operators::SquaredResidual::new(l)));
        let via_sep = project_halfspace(&separator_at(&cf, &z).unwrap(), &z).unwrap();
        assert!(via_sep.max_abs_diff(&step) < 1e-14);
    }

    #[test]
    fn linearized_graph_step_exact_when_residual_vanishes() {
        let l = LinearMap::scaled_identity(2, 2.0);
        let z = pt(&[1.0, -1.0, 2.0, -2.0]);
        assert_eq!(linearized_graph_step(&l, &z).unwrap(), z);
    }
}
