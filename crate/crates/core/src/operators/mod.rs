//! Selection oracles for set-valued monotone operators.
//!
//! An operator `T: ℝⁿ ⇉ ℝⁿ` is exposed through a single deterministic
//! selection `x ↦ u ∈ T(x)`. The splitting cycle only ever needs one element
//! of `T_i(z)` per step.

mod functions;
mod linear;

use std::fmt;
use std::sync::Arc;

pub use functions::{
    Constant, ConvexFunction, HalfSquaredDistance, L1Norm, LogSumExp, MaxAffine, NormBall, Shifted,
    SquaredBall, SquaredResidual,
};
pub use linear::LinearMap;

use crate::error::{check_dim, Error, Result};
use crate::space::Point;

pub trait OperatorOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    /// One element of `T(x)`. Callers guarantee `x.dim() == self.dim()`.
    fn eval(&self, x: &Point) -> Point;
}

pub type SharedOperator = Arc<dyn OperatorOracle>;
pub type SharedFunction = Arc<dyn ConvexFunction>;

pub fn select(oracle: &dyn OperatorOracle, x: &Point) -> Result<Point> {
    check_dim(oracle.dim(), x.dim())?;
    Ok(oracle.eval(x))
}

/// `Σ_i select(T_i, x)`, an element of `(T_1 + ⋯ + T_m)(x)`.
pub fn sum_select(oracles: &[SharedOperator], x: &Point) -> Result<Point> {
    let (first, rest) = oracles.split_first().ok_or(Error::EmptyOperatorList)?;
    let mut acc = select(first.as_ref(), x)?;
    for op in rest {
        acc.add_scaled_mut(1.0, &select(op.as_ref(), x)?);
    }
    Ok(acc)
}

/// `x ↦ Ax + b` with `A + Aᵀ ⪰ 0`.
#[derive(Clone, Debug)]
pub struct AffineOperator {
    matrix: LinearMap,
    offset: Point,
}

impl AffineOperator {
    pub fn new(matrix: LinearMap, offset: Point) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument(
                "affine operator needs a square matrix".into(),
            ));
        }
        check_dim(matrix.rows(), offset.dim())?;
        let lambda = matrix.min_symmetric_eigenvalue()?;
        if lambda < -1e-12 {
            return Err(Error::InvalidArgument(format!(
                "affine operator is not monotone: symmetric part has eigenvalue {lambda}"
            )));
        }
        Ok(AffineOperator { matrix, offset })
    }

    pub fn matrix(&self) -> &LinearMap {
        &self.matrix
    }

    pub fn offset(&self) -> &Point {
        &self.offset
    }
}

impl OperatorOracle for AffineOperator {
    fn dim(&self) -> usize {
        self.offset.dim()
    }

    fn label(&self) -> String {
        "affine".into()
    }

    fn eval(&self, x: &Point) -> Point {
        self.matrix.mul(x).add(&self.offset)
    }
}

/// The subdifferential `∂f` of a convex function, through its oracle.
#[derive(Clone, Debug)]
pub struct SubgradientOperator {
    function: SharedFunction,
}

impl SubgradientOperator {
    pub fn new(function: SharedFunction) -> Self {
        SubgradientOperator { function }
    }

    pub fn function(&self) -> &SharedFunction {
        &self.function
    }
}

impl OperatorOracle for SubgradientOperator {
    fn dim(&self) -> usize {
        self.function.dim()
    }

    fn label(&self) -> String {
        format!("subdiff[{}]", self.function.label())
    }

    fn eval(&self, x: &Point) -> Point {
        self.function.subgradient(x)
    }
}

/// `factor · T`, factor ≥ 0.
#[derive(Clone, Debug)]
pub struct ScaledOperator {
    inner: SharedOperator,
    factor: f64,
}

impl ScaledOperator {
    pub fn new(inner: SharedOperator, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scaling must be finite and >= 0 to preserve monotonicity, got {factor}"
            )));
        }
        Ok(ScaledOperator { inner, factor })
    }
}

impl OperatorOracle for ScaledOperator {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn label(&self) -> String {
        format!("{}*{}", self.factor, self.inner.label())
    }

    fn eval(&self, x: &Point) -> Point {
        self.inner.eval(x).scale(self.factor)
    }
}

/// Lifts an operator on one block of a product space: the block
/// `[offset, offset + inner.dim())` receives `T(x_block)`, every other
/// coordinate receives 0.
#[derive(Clone, Debug)]
pub struct BlockOperator {
    inner: SharedOperator,
    offset: usize,
    total_dim: usize,
}

impl BlockOperator {
    pub fn new(inner: SharedOperator, offset: usize, total_dim: usize) -> Result<Self> {
        if offset + inner.dim() > total_dim {
            return Err(Error::InvalidArgument(format!(
                "block [{offset}, {}) exceeds dimension {total_dim}",
                offset + inner.dim()
            )));
        }
        Ok(BlockOperator {
            inner,
            offset,
            total_dim,
        })
    }
}

impl OperatorOracle for BlockOperator {
    fn dim(&self) -> usize {
        self.total_dim
    }

    fn label(&self) -> String {
        format!("block@{}[{}]", self.offset, self.inner.label())
    }

    fn eval(&self, x: &Point) -> Point {
        let n = self.inner.dim();
        let u = self.inner.eval(&x.slice(self.offset, n));
        let mut out = vec![0.0; self.total_dim];
        out[self.offset..self.offset + n].copy_from_slice(u.coords());
        Point::from_vec(out)
    }
}

/// Saddle operator `(x₁, x₂) ↦ (L x₂, ∇φ₂(x₂) − L x₁)` of a minimax problem
/// `min_{x₁} max_{x₂} φ₁(x₁) − φ₂(x₂) + ⟨x₂, L x₁⟩` with self-adjoint `L`.
/// It is monotone: the `L` blocks form a skew map and `∇φ₂` is monotone.
#[derive(Clone, Debug)]
pub struct SaddleCoupling {
    map: LinearMap,
    phi2: SharedFunction,
}

impl SaddleCoupling {
    pub fn new(map: LinearMap, phi2: SharedFunction) -> Result<Self> {
        if !map.is_square() {
            return Err(Error::InvalidArgument("coupling map must be square".into()));
        }
        check_dim(map.cols(), phi2.dim())?;
        Ok(SaddleCoupling { map, phi2 })
    }
}

impl OperatorOracle for SaddleCoupling {
    fn dim(&self) -> usize {
        2 * self.map.cols()
    }

    fn label(&self) -> String {
        format!("saddle-coupling[{}]", self.phi2.label())
    }

    fn eval(&self, z: &Point) -> Point {
        let n = self.map.cols();
        let (x1, x2) = (z.slice(0, n), z.slice(n, n));
        let top = self.map.mul(&x2);
        let bottom = self.phi2.subgradient(&x2).sub(&self.map.mul(&x1));
        top.concat(&bottom)
    }
}

#[derive(Clone, Debug)]
pub struct ZeroOperator {
    dim: usize,
}

impl ZeroOperator {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        ZeroOperator { dim }
    }
}

impl OperatorOracle for ZeroOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        "zero".into()
    }

    fn eval(&self, _x: &Point) -> Point {
        Point::zeros(self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::pt;

    fn grad_half_sq(center: &[f64]) -> SharedOperator {
        Arc::new(SubgradientOperator::new(Arc::new(
            HalfSquaredDistance::unit(pt(center)),
        )))
    }

    #[test]
    fn select_examples() {
        let t = grad_half_sq(&[1.0, 1.0]);
        assert_eq!(
            select(t.as_ref(), &pt(&[0.0, 0.0])).unwrap(),
            pt(&[-1.0, -1.0])
        );

        let abs = SubgradientOperator::new(Arc::new(L1Norm::new(1, 1.0).unwrap()));
        assert_eq!(select(&abs, &pt(&[0.0])).unwrap(), pt(&[0.0]));
        assert_eq!(select(&abs, &pt(&[-2.0])).unwrap(), pt(&[-1.0]));

        assert!(select(t.as_ref(), &pt(&[0.0])).is_err());
    }

    #[test]
    fn select_is_deterministic() {
        let t = grad_half_sq(&[0.3, -0.7]);
        let x = pt(&[1.25, 2.5]);
        assert_eq!(t.eval(&x), t.eval(&x));
    }

    #[test]
    fn sum_select_examples() {
        let half = grad_half_sq(&[0.0, 0.0]);
        assert_eq!(
            sum_select(&[half.clone(), half.clone()], &pt(&[2.0, 0.0])).unwrap(),
            pt(&[4.0, 0.0])
        );
        assert_eq!(
            sum_select(std::slice::from_ref(&half), &pt(&[2.0, 1.0])).unwrap(),
            select(half.as_ref(), &pt(&[2.0, 1.0])).unwrap()
        );
        let zero: SharedOperator = Arc::new(ZeroOperator::new(3));
        let zeros = vec![zero.clone(), zero.clone(), zero];
        assert_eq!(
            sum_select(&zeros, &pt(&[1.0, 2.0, 3.0])).unwrap(),
            Point::zeros(3)
        );
        assert_eq!(
            sum_select(&[], &pt(&[1.0])).unwrap_err(),
            Error::EmptyOperatorList
        );
    }

    #[test]
    fn affine_rejects_non_monotone() {
        let neg = LinearMap::scaled_identity(2, -1.0);
        assert!(AffineOperator::new(neg, Point::zeros(2)).is_err());
        let skew = LinearMap::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let op = AffineOperator::new(skew, pt(&[1.0, 0.0])).unwrap();
        assert_eq!(op.eval(&pt(&[1.0, 2.0])), pt(&[3.0, -1.0]));
    }

    #[test]
    fn block_operator_embeds() {
        let inner = grad_half_sq(&[1.0]);
        let b = BlockOperator::new(inner, 1, 3).unwrap();
        assert_eq!(b.eval(&pt(&[5.0, 3.0, 7.0])), pt(&[0.0, 2.0, 0.0]));
        assert!(BlockOperator::new(grad_half_sq(&[1.0, 1.0]), 2, 3).is_err());
    }

    #[test]
    fn saddle_coupling_values() {
        let c = SaddleCoupling::new(
            LinearMap::identity(1),
            Arc::new(HalfSquaredDistance::unit(pt(&[0.0]))),
        )
        .unwrap();
        // (x1, x2) = (1, 2): (L x2, x2 - L x1) = (2, 1)
        assert_eq!(c.eval(&pt(&[1.0, 2.0])), pt(&[2.0, 1.0]));
    }
}
