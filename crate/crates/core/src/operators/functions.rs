//! Convex function oracles: a value and one subgradient per query point.
//!
//! Where the subdifferential is not a singleton the oracle returns a fixed
//! element. The convention is documented on each type; the minimum-norm
//! element is used whenever it is cheap to compute.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::operators::LinearMap;
use crate::space::Point;

pub trait ConvexFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    fn value(&self, x: &Point) -> f64;

    fn subgradient(&self, x: &Point) -> Point;

    /// True when the function is differentiable everywhere, so finite
    /// differences may be compared against [`ConvexFunction::subgradient`].
    fn is_smooth(&self) -> bool {
        false
    }
}

/// `½·w·‖x − center‖²`
#[derive(Clone, Debug)]
pub struct HalfSquaredDistance {
    center: Point,
    weight: f64,
}

impl HalfSquaredDistance {
    pub fn new(center: Point, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight must be >= 0, got {weight}"
            )));
        }
        Ok(HalfSquaredDistance { center, weight })
    }

    pub fn unit(center: Point) -> Self {
        HalfSquaredDistance {
            center,
            weight: 1.0,
        }
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl ConvexFunction for HalfSquaredDistance {
    fn dim(&self) -> usize {
        self.center.dim()
    }

    fn label(&self) -> String {
        format!("half-squared-distance(w={})", self.weight)
    }

    fn value(&self, x: &Point) -> f64 {
        0.5 * self.weight * x.dist_sq(&self.center)
    }

    fn subgradient(&self, x: &Point) -> Point {
        x.sub(&self.center).scale(self.weight)
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// `‖x − center‖² − r²`, whose zero sublevel set is the closed ball.
#[derive(Clone, Debug)]
pub struct SquaredBall {
    center: Point,
    radius: f64,
}

impl SquaredBall {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radius must be >= 0, got {radius}"
            )));
        }
        Ok(SquaredBall { center, radius })
    }

    pub fn unit(dim: usize) -> Self {
        SquaredBall {
            center: Point::zeros(dim),
            radius: 1.0,
        }
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ConvexFunction for SquaredBall {
    fn dim(&self) -> usize {
        self.center.dim()
    }

    fn label(&self) -> String {
        format!("squared-ball(r={})", self.radius)
    }

    fn value(&self, x: &Point) -> f64 {
        x.dist_sq(&self.center) - self.radius * self.radius
    }

    fn subgradient(&self, x: &Point) -> Point {
        x.sub(&self.center).scale(2.0)
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// `‖x − center‖ − r`. At the center the subgradient returned is 0, the
/// minimum-norm element of the unit ball ∂‖·‖(0).
#[derive(Clone, Debug)]
pub struct NormBall {
    center: Point,
    radius: f64,
}

impl NormBall {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radius must be >= 0, got {radius}"
            )));
        }
        Ok(NormBall { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl ConvexFunction for NormBall {
    fn dim(&self) -> usize {
        self.center.dim()
    }

    fn label(&self) -> String {
        format!("norm-ball(r={})", self.radius)
    }

    fn value(&self, x: &Point) -> f64 {
        x.dist(&self.center) - self.radius
    }

    fn subgradient(&self, x: &Point) -> Point {
        let d = x.sub(&self.center);
        let n = d.norm();
        if n == 0.0 {
            d
        } else {
            d.scale(1.0 / n)
        }
    }
}

/// `max_i (⟨a_i, x⟩ − b_i)`.
///
/// At ties the gradient of minimum norm among the active pieces is returned,
/// lowest row index first. This is not the minimum-norm element of the full
/// convex hull, which would need a small QP.
#[derive(Clone, Debug)]
pub struct MaxAffine {
    rows: Vec<(Point, f64)>,
}

impl MaxAffine {
    pub fn new(rows: Vec<(Point, f64)>) -> Result<Self> {
        let Some((first, _)) = rows.first() else {
            return Err(Error::InvalidArgument(
                "max-affine needs at least one row".into(),
            ));
        };
        let n = first.dim();
        for (a, b) in &rows {
            check_dim(n, a.dim())?;
            if !b.is_finite() {
                return Err(Error::NonFinite("max-affine offset"));
            }
        }
        Ok(MaxAffine { rows })
    }

    /// The single affine function `⟨a, x⟩ − b`.
    pub fn affine(normal: Point, offset: f64) -> Result<Self> {
        Self::new(vec![(normal, offset)])
    }

    /// The box `lower ≤ x ≤ upper` written as `max_i` of its 2n faces.
    pub fn from_box(lower: &Point, upper: &Point) -> Result<Self> {
        check_dim(lower.dim(), upper.dim())?;
        let n = lower.dim();
        let mut rows = Vec::with_capacity(2 * n);
        for i in 0..n {
            rows.push((Point::basis(n, i), upper[i]));
            rows.push((Point::basis(n, i).scale(-1.0), -lower[i]));
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[(Point, f64)] {
        &self.rows
    }

    fn piece(&self, i: usize, x: &Point) -> f64 {
        let (a, b) = &self.rows[i];
        a.dot(x) - b
    }
}

impl ConvexFunction for MaxAffine {
    fn dim(&self) -> usize {
        self.rows[0].0.dim()
    }

    fn label(&self) -> String {
        format!("max-affine({} rows)", self.rows.len())
    }

    fn value(&self, x: &Point) -> f64 {
        (0..self.rows.len())
            .map(|i| self.piece(i, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn subgradient(&self, x: &Point) -> Point {
        let values: Vec<f64> = (0..self.rows.len()).map(|i| self.piece(i, x)).collect();
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-14 * (1.0 + top.abs());
        let mut best: Option<(f64, usize)> = None;
        for (i, v) in values.iter().enumerate() {
            if *v >= top - tol {
                let n = self.rows[i].0.norm_sq();
                if best.is_none_or(|(bn, _)| n < bn) {
                    best = Some((n, i));
                }
            }
        }
        let (_, i) = best.expect("at least one active row");
        self.rows[i].0.clone()
    }
}

/// `w·Σ|x_i|`, with `sign(0) = 0` (the minimum-norm subgradient).
#[derive(Clone, Debug)]
pub struct L1Norm {
    dim: usize,
    weight: f64,
}

impl L1Norm {
    pub fn new(dim: usize, weight: f64) -> Result<Self> {
        if dim == 0 || !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidArgument(
                "l1 norm needs dim >= 1 and weight >= 0".into(),
            ));
        }
        Ok(L1Norm { dim, weight })
    }
}

impl ConvexFunction for L1Norm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        format!("l1(w={})", self.weight)
    }

    fn value(&self, x: &Point) -> f64 {
        self.weight * x.coords().iter().map(|v| v.abs()).sum::<f64>()
    }

    fn subgradient(&self, x: &Point) -> Point {
        let s = x
            .coords()
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    self.weight
                } else if v < 0.0 {
                    -self.weight
                } else {
                    0.0
                }
            })
            .collect();
        Point::from_vec(s)
    }
}

/// `log Σ exp(x_i)`, evaluated with the max shift.
#[derive(Clone, Debug)]
pub struct LogSumExp {
    dim: usize,
}

impl LogSumExp {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        LogSumExp { dim }
    }
}

impl ConvexFunction for LogSumExp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        "log-sum-exp".into()
    }

    fn value(&self, x: &Point) -> f64 {
        let m = x.coords().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + x.coords().iter().map(|v| (v - m).exp()).sum::<f64>().ln()
    }

    fn subgradient(&self, x: &Point) -> Point {
        let m = x.coords().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = x.coords().iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        Point::from_vec(e.into_iter().map(|v| v / s).collect())
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug)]
pub struct Constant {
    dim: usize,
    value: f64,
}

impl Constant {
    pub fn new(dim: usize, value: f64) -> Self {
        assert!(dim >= 1 && value.is_finite());
        Constant { dim, value }
    }
}

impl ConvexFunction for Constant {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        format!("constant({})", self.value)
    }

    fn value(&self, _x: &Point) -> f64 {
        self.value
    }

    fn subgradient(&self, _x: &Point) -> Point {
        Point::zeros(self.dim)
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// `½‖Lx − y‖²` on the product space, with points laid out as `(x, y)`.
/// Its zero set is the graph `{(x, y) : Lx = y}`.
#[derive(Clone, Debug)]
pub struct SquaredResidual {
    map: LinearMap,
}

impl SquaredResidual {
    pub fn new(map: LinearMap) -> Self {
        SquaredResidual { map }
    }

    pub fn map(&self) -> &LinearMap {
        &self.map
    }

    fn residual(&self, z: &Point) -> Point {
        let (n, p) = (self.map.cols(), self.map.rows());
        self.map.mul(&z.slice(0, n)).sub(&z.slice(n, p))
    }
}

impl ConvexFunction for SquaredResidual {
    fn dim(&self) -> usize {
        self.map.cols() + self.map.rows()
    }

    fn label(&self) -> String {
        "squared-residual".into()
    }

    fn value(&self, z: &Point) -> f64 {
        0.5 * self.residual(z).norm_sq()
    }

    fn subgradient(&self, z: &Point) -> Point {
        let r = self.residual(z);
        self.map.mul_transpose(&r).concat(&r.scale(-1.0))
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// `f(x) − shift`, used to turn a minimisation into the sublevel constraint
/// `f(x) − f* ≤ 0`.
#[derive(Clone, Debug)]
pub struct Shifted {
    inner: Arc<dyn ConvexFunction>,
    shift: f64,
}

impl Shifted {
    pub fn new(inner: Arc<dyn ConvexFunction>, shift: f64) -> Self {
        Shifted { inner, shift }
    }
}

impl ConvexFunction for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn label(&self) -> String {
        format!("{} - {}", self.inner.label(), self.shift)
    }

    fn value(&self, x: &Point) -> f64 {
        self.inner.value(x) - self.shift
    }

    fn subgradient(&self, x: &Point) -> Point {
        self.inner.subgradient(x)
    }

    fn is_smooth(&self) -> bool {
        self.inner.is_smooth()
    }
}
