use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::space::Point;

/// Dense linear map ℝⁿ → ℝᵖ with its adjoint (the transpose).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
}

impl LinearMap {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 || rows[0].is_empty() {
            return Err(Error::InvalidArgument(
                "linear map needs at least one row and column".into(),
            ));
        }
        let ncols = rows[0].len();
        for r in rows {
            check_dim(ncols, r.len())?;
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear map entries"));
        }
        Ok(LinearMap {
            matrix: DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]),
        })
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "linear map needs at least one row and column".into(),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear map entries"));
        }
        Ok(LinearMap { matrix })
    }

    pub fn identity(n: usize) -> Self {
        LinearMap {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        LinearMap {
            matrix: DMatrix::identity(n, n) * s,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        LinearMap {
            matrix: DMatrix::zeros(rows, cols),
        }
    }

    /// Output dimension.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Input dimension.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| self.matrix.row(i).iter().copied().collect())
            .collect()
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        check_dim(self.cols(), x.dim())?;
        Ok(self.mul(x))
    }

    pub fn adjoint_apply(&self, y: &Point) -> Result<Point> {
        check_dim(self.rows(), y.dim())?;
        Ok(self.mul_transpose(y))
    }

    pub(crate) fn mul(&self, x: &Point) -> Point {
        let v = &self.matrix * DVector::from_column_slice(x.coords());
        Point::from_vec(v.as_slice().to_vec())
    }

    pub(crate) fn mul_transpose(&self, y: &Point) -> Point {
        let v = self.matrix.tr_mul(&DVector::from_column_slice(y.coords()));
        Point::from_vec(v.as_slice().to_vec())
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Max-abs entry of `M - Mᵀ`; zero for self-adjoint maps.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Smallest eigenvalue of the symmetric part `(M + Mᵀ)/2`. The map is
    /// monotone exactly when this is nonnegative.
    pub fn min_symmetric_eigenvalue(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::InvalidArgument(
                "symmetric part of a non-square map".into(),
            ));
        }
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        Ok(eig.eigenvalues.min())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::pt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn apply_examples() {
        let id = LinearMap::identity(2);
        assert_eq!(id.apply(&pt(&[5.0, 6.0])).unwrap(), pt(&[5.0, 6.0]));

        let shift = LinearMap::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(shift.apply(&pt(&[1.0, 2.0])).unwrap(), pt(&[2.0, 0.0]));
        assert_eq!(
            shift.adjoint_apply(&pt(&[1.0, 0.0])).unwrap(),
            pt(&[0.0, 1.0])
        );

        let two = LinearMap::scaled_identity(2, 2.0);
        assert_eq!(two.apply(&pt(&[1.0, -1.0])).unwrap(), pt(&[2.0, -2.0]));
    }

    #[test]
    fn dimension_errors() {
        let m = LinearMap::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(m.apply(&pt(&[1.0, 2.0])).is_err());
        assert!(m.adjoint_apply(&pt(&[1.0, 2.0])).is_err());
        assert!(LinearMap::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(LinearMap::from_rows(&[]).is_err());
    }

    #[test]
    fn adjoint_consistency_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (p, n) = (rng.random_range(1..5), rng.random_range(1..5));
            let rows: Vec<Vec<f64>> = (0..p)
                .map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect();
            let l = LinearMap::from_rows(&rows).unwrap();
            let x = Point::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            let y = Point::new((0..p).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            let lhs = l.apply(&x).unwrap().dot(&y);
            let rhs = x.dot(&l.adjoint_apply(&y).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10);
        }
    }

    #[test]
    fn linearity_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = LinearMap::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0], vec![0.0, 1.0]]).unwrap();
        for _ in 0..100 {
            let x = Point::new(vec![
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ])
            .unwrap();
            let y = Point::new(vec![
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ])
            .unwrap();
            let s: f64 = rng.random_range(-2.0..2.0);
            let lhs = l.apply(&x.add_scaled(s, &y)).unwrap();
            let rhs = l.apply(&x).unwrap().add_scaled(s, &l.apply(&y).unwrap());
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn symmetric_part_of_skew_is_zero() {
        let skew = LinearMap::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(skew.min_symmetric_eigenvalue().unwrap().abs() < 1e-14);
        assert_eq!(skew.asymmetry(), 2.0);
        assert_eq!(LinearMap::identity(3).asymmetry(), 0.0);
    }
}
