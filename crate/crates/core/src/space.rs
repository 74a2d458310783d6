//! Finite-dimensional inner-product space primitives.
//!
//! [`Point`] is a dense coordinate vector in ℝⁿ with the Euclidean inner
//! product. Every coordinate is finite: NaN and infinities are rejected when a
//! point is constructed from user data, and the solver re-checks iterates.
//!
//! The free functions [`inner`], [`norm`] and [`axpy`] are the checked entry
//! points. The inherent methods on `Point` assume matching dimensions and
//! panic otherwise; they are used on hot paths after the dimensions of a
//! problem have been validated once.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPoint);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Point(coords))
    }

    /// Builds a point from coordinates already known to be finite and non-empty.
    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Point(vec![0.0; dim])
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut p = Self::zeros(dim);
        p.0[i] = 1.0;
        p
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn dot(&self, other: &Point) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dot");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dist");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn add(&self, other: &Point) -> Point {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Point) -> Point {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| s * a).collect())
    }

    /// `self + s * dir`
    pub fn add_scaled(&self, s: f64, dir: &Point) -> Point {
        self.zip_with(dir, |a, d| a + s * d)
    }

    pub fn add_scaled_mut(&mut self, s: f64, dir: &Point) {
        assert_eq!(
            self.dim(),
            dir.dim(),
            "dimension mismatch in add_scaled_mut"
        );
        for (a, d) in self.0.iter_mut().zip(&dir.0) {
            *a += s * d;
        }
    }

    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        self.zip_iter(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Concatenates two points into a point of the product space.
    pub fn concat(&self, other: &Point) -> Point {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Point(v)
    }

    /// Coordinates `[start, start + len)` as a new point.
    pub fn slice(&self, start: usize, len: usize) -> Point {
        Point(self.0[start..start + len].to_vec())
    }

    fn zip_iter<'a>(&'a self, other: &'a Point) -> impl Iterator<Item = (f64, f64)> + 'a {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0.iter().copied().zip(other.0.iter().copied())
    }

    fn zip_with(&self, other: &Point, f: impl Fn(f64, f64) -> f64) -> Point {
        Point(self.zip_iter(other).map(|(a, b)| f(a, b)).collect())
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

/// Convenience constructor for literals in tests and examples. Panics on
/// empty or non-finite input.
pub fn pt(coords: &[f64]) -> Point {
    Point::new(coords.to_vec()).expect("valid point literal")
}

pub fn inner(x: &Point, y: &Point) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    Ok(x.dot(y))
}

pub fn norm(x: &Point) -> f64 {
    x.norm()
}

/// `a * x + y`, componentwise.
pub fn axpy(a: f64, x: &Point, y: &Point) -> Result<Point> {
    check_dim(x.dim(), y.dim())?;
    if !a.is_finite() {
        return Err(Error::NonFinite("axpy scalar"));
    }
    let out = y.add_scaled(a, x);
    if !out.is_finite() {
        return Err(Error::NonFinite("axpy result"));
    }
    Ok(out)
}
