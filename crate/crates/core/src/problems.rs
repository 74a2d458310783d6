//! Problem families with known solutions.
//!
//! * A1: minimise `f` over `S = argmin f` written as the constraint `f − f* ≤ 0`.
//! * A2: `min φ₁(Lx) + φ₂(x)` on the graph `K = {(x, y) : Lx = y}`.
//! * A3: the saddle problem `min_{x₁} max_{x₂} φ₁(x₁) − φ₂(x₂) + ⟨x₂, Lx₁⟩`.
//! * Synthetic quadratic-over-ball and affine-VI-over-polyhedron instances.
//!
//! [`build`] turns a [`ProblemRecipe`] into a [`Problem`] and attaches the
//! reference solution and certificate from [`crate::oracle`] when one exists.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintFunction, SetDescriptor};
use crate::error::{check_dim, Error, Result};
use crate::operators::{
    AffineOperator, BlockOperator, Constant, HalfSquaredDistance, L1Norm, LinearMap, LogSumExp,
    MaxAffine, SaddleCoupling, SharedFunction, SharedOperator, Shifted, SquaredBall,
    SquaredResidual, SubgradientOperator,
};
use crate::oracle;
use crate::solver::Problem;
use crate::space::Point;

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn unit_radius() -> f64 {
    1.0
}

fn unit_weight() -> f64 {
    1.0
}

/// Convex functions that recipes can name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Zero {
        dim: usize,
    },
    /// `½·weight·‖x − center‖²`
    HalfSquaredDistance {
        center: Vec<f64>,
        #[serde(default = "unit_weight")]
        weight: f64,
    },
    L1 {
        dim: usize,
        #[serde(default = "unit_weight")]
        weight: f64,
    },
    LogSumExp {
        dim: usize,
    },
}

impl FunctionSpec {
    pub fn dim(&self) -> usize {
        match self {
            FunctionSpec::Zero { dim }
            | FunctionSpec::L1 { dim, .. }
            | FunctionSpec::LogSumExp { dim } => *dim,
            FunctionSpec::HalfSquaredDistance { center, .. } => center.len(),
        }
    }

    pub fn build(&self) -> Result<SharedFunction> {
        if self.dim() == 0 {
            return Err(Error::Config("function dimension must be >= 1".into()));
        }
        Ok(match self {
            FunctionSpec::Zero { dim } => Arc::new(Constant::new(*dim, 0.0)),
            FunctionSpec::HalfSquaredDistance { center, weight } => Arc::new(
                HalfSquaredDistance::new(Point::new(center.clone())?, *weight)?,
            ),
            FunctionSpec::L1 { dim, weight } => Arc::new(L1Norm::new(*dim, *weight)?),
            FunctionSpec::LogSumExp { dim } => Arc::new(LogSumExp::new(*dim)),
        })
    }

    /// `(w, c)` when the function is `½w‖x − c‖²` (zero counts, with `w = 0`).
    pub fn as_quadratic(&self) -> Option<(f64, Point)> {
        match self {
            FunctionSpec::Zero { dim } => Some((0.0, Point::zeros(*dim))),
            FunctionSpec::HalfSquaredDistance { center, weight } => {
                Some((*weight, Point::new(center.clone()).ok()?))
            }
            _ => None,
        }
    }
}

/// One row `⟨normal, x⟩ ≤ offset` of a polyhedron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Serializable description of a test problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemRecipe {
    /// `T = ∇½‖x − target‖²` split into `m` equal parts, `C` a ball
    /// (default: the unit ball at the origin).
    QuadraticBall {
        target: Vec<f64>,
        #[serde(default = "one")]
        m: usize,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "unit_radius")]
        radius: f64,
    },
    /// `T(x) = Ax + b` split into `m` equal parts over a polyhedron
    /// (default: the box `[−1, 1]^dim`). A missing matrix or offset is drawn
    /// from `seed`.
    AffinePolyhedron {
        #[serde(default = "two")]
        dim: usize,
        #[serde(default)]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        offset: Option<Vec<f64>>,
        #[serde(default)]
        rows: Option<Vec<RowSpec>>,
        #[serde(default)]
        slater: Option<Vec<f64>>,
        #[serde(default = "one")]
        m: usize,
        #[serde(default)]
        seed: u64,
    },
    /// `T = ∇½‖x − target‖²` over `argmin ½‖x − center‖²`, i.e. `C = {center}`.
    A1 {
        target: Vec<f64>,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    A2 {
        map: Vec<Vec<f64>>,
        phi1: FunctionSpec,
        phi2: FunctionSpec,
    },
    A3 {
        map: Vec<Vec<f64>>,
        phi1: FunctionSpec,
        phi2: FunctionSpec,
    },
}

impl ProblemRecipe {
    pub fn family(&self) -> &'static str {
        match self {
            ProblemRecipe::QuadraticBall { .. } => "quadratic-ball",
            ProblemRecipe::AffinePolyhedron { .. } => "affine-polyhedron",
            ProblemRecipe::A1 { .. } => "a1",
            ProblemRecipe::A2 { .. } => "a2",
            ProblemRecipe::A3 { .. } => "a3",
        }
    }

    /// Fills seeded defaults so the recipe describes its instance explicitly.
    pub fn resolve(&self) -> Result<ProblemRecipe> {
        let ProblemRecipe::AffinePolyhedron {
            dim,
            matrix,
            offset,
            rows,
            slater,
            m,
            seed,
        } = self
        else {
            return Ok(self.clone());
        };
        let n = *dim;
        if n == 0 {
            return Err(Error::Config("affine-polyhedron dim must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        let matrix = match matrix {
            Some(a) => a.clone(),
            None => {
                // εI plus a random skew part: monotone, not symmetric.
                let raw: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let skew = raw[i][j] - raw[j][i];
                                if i == j {
                                    0.2
                                } else {
                                    skew
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        let offset = match offset {
            Some(b) => b.clone(),
            None => (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        };
        let (rows, slater) = match rows {
            Some(r) => {
                let w = slater.clone().ok_or_else(|| {
                    Error::Config(
                        "affine-polyhedron with explicit rows needs a slater point".into(),
                    )
                })?;
                (r.clone(), w)
            }
            None => {
                let lower = Point::new(vec![-1.0; n])?;
                let upper = Point::new(vec![1.0; n])?;
                let rows = MaxAffine::from_box(&lower, &upper)?
                    .rows()
                    .iter()
                    .map(|(a, b)| RowSpec {
                        normal: a.coords().to_vec(),
                        offset: *b,
                    })
                    .collect();
                (rows, slater.clone().unwrap_or_else(|| vec![0.0; n]))
            }
        };
        Ok(ProblemRecipe::AffinePolyhedron {
            dim: n,
            matrix: Some(matrix),
            offset: Some(offset),
            rows: Some(rows),
            slater: Some(slater),
            m: *m,
            seed: *seed,
        })
    }
}

/// How A1's constraint `f − f*` bounds the distance to `S`.
#[derive(Clone, Debug)]
pub enum DistanceRule {
    Exact(SetDescriptor),
    /// `dist(x, S) ≤ factor·(f(x) − f*)⁺`
    Surrogate(f64),
    Slater(Point),
}

fn constraint_with(cf: ConstraintFunction, rule: DistanceRule) -> Result<ConstraintFunction> {
    match rule {
        DistanceRule::Exact(set) => cf.with_exact_set(set),
        DistanceRule::Surrogate(k) => cf.with_surrogate(k),
        DistanceRule::Slater(w) => cf.with_slater(w),
    }
}

fn subdiff(f: SharedFunction) -> SharedOperator {
    Arc::new(SubgradientOperator::new(f))
}

/// A1: `m = 1`, `T₁ = T`, `c = f − f*`.
///
/// `f*` must be `min f`. `S = argmin f` never has a Slater point, so the
/// distance rule must be supplied.
pub fn build_a1(
    t: SharedOperator,
    f: SharedFunction,
    f_star: f64,
    rule: DistanceRule,
) -> Result<Problem> {
    if !f_star.is_finite() {
        return Err(Error::NonFinite("f*"));
    }
    let cf = constraint_with(
        ConstraintFunction::new(Arc::new(Shifted::new(f, f_star))),
        rule,
    )?;
    Problem::new(vec![t], cf, "a1")
}

/// A2 on the product space `(x, y)`: `T₁ = ∂φ₁` on the `y` block,
/// `T₂ = ∂φ₂` on the `x` block, `C = K` with the exact projection path.
pub fn build_a2(l: LinearMap, phi1: SharedFunction, phi2: SharedFunction) -> Result<Problem> {
    let (n, p) = (l.cols(), l.rows());
    check_dim(p, phi1.dim())?;
    check_dim(n, phi2.dim())?;
    let total = n + p;
    let t1: SharedOperator = Arc::new(BlockOperator::new(subdiff(phi1), n, total)?);
    let t2: SharedOperator = Arc::new(BlockOperator::new(subdiff(phi2), 0, total)?);
    let cf = ConstraintFunction::new(Arc::new(SquaredResidual::new(l.clone())))
        .with_exact_set(SetDescriptor::Graph(l))?;
    Problem::new(vec![t1, t2], cf, "a2")?.with_exact_projection()
}

/// A3 on `(x₁, x₂)`: `T₁ = (∂φ₁(x₁), 0)`, `T₂ = (Lx₂, ∇φ₂(x₂) − Lx₁)`,
/// unconstrained.
pub fn build_a3(l: LinearMap, phi1: SharedFunction, phi2: SharedFunction) -> Result<Problem> {
    if !l.is_square() || l.asymmetry() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "A3 needs a self-adjoint map, asymmetry is {}",
            l.asymmetry()
        )));
    }
    if !phi2.is_smooth() {
        return Err(Error::InvalidArgument(
            "A3 needs a differentiable phi2".into(),
        ));
    }
    let n = l.cols();
    check_dim(n, phi1.dim())?;
    let total = 2 * n;
    let t1: SharedOperator = Arc::new(BlockOperator::new(subdiff(phi1), 0, total)?);
    let t2: SharedOperator = Arc::new(SaddleCoupling::new(l, phi2)?);
    let cf = ConstraintFunction::new(Arc::new(Constant::new(total, -1.0)))
        .with_exact_set(SetDescriptor::WholeSpace { dim: total })?;
    Problem::new(vec![t1, t2], cf, "a3")
}

fn parts_of(op: SharedOperator, m: usize) -> Result<Vec<SharedOperator>> {
    if m == 0 {
        return Err(Error::Config("m must be >= 1".into()));
    }
    Ok((0..m).map(|_| op.clone()).collect())
}

/// Quadratic-over-ball and affine-over-polyhedron instances.
pub fn build_synthetic(recipe: &ProblemRecipe) -> Result<Problem> {
    match recipe.resolve()? {
        ProblemRecipe::QuadraticBall {
            target,
            m,
            center,
            radius,
        } => {
            let a = Point::new(target)?;
            let c = match center {
                Some(c) => Point::new(c)?,
                None => Point::zeros(a.dim()),
            };
            check_dim(a.dim(), c.dim())?;
            let part = subdiff(Arc::new(HalfSquaredDistance::new(
                a,
                1.0 / m.max(1) as f64,
            )?));
            let ball = SetDescriptor::Ball {
                center: c.clone(),
                radius,
            };
            ball.validate()?;
            if radius <= 0.0 {
                return Err(Error::Config("quadratic-ball radius must be > 0".into()));
            }
            let cf = ConstraintFunction::new(Arc::new(SquaredBall::new(c, radius)?))
                .with_exact_set(ball)?;
            Problem::new(parts_of(part, m)?, cf, "quadratic-ball")
        }
        ProblemRecipe::AffinePolyhedron {
            matrix,
            offset,
            rows,
            slater,
            m,
            ..
        } => {
            let (matrix, offset, rows, slater) = (
                matrix.expect("resolved"),
                offset.expect("resolved"),
                rows.expect("resolved"),
                slater.expect("resolved"),
            );
            let scale = 1.0 / m.max(1) as f64;
            let scaled = LinearMap::from_rows(
                &matrix
                    .iter()
                    .map(|r| r.iter().map(|v| v * scale).collect())
                    .collect::<Vec<_>>(),
            )?;
            let b = Point::new(offset)?.scale(scale);
            let part: SharedOperator = Arc::new(AffineOperator::new(scaled, b)?);
            let rows = rows
                .into_iter()
                .map(|r| Ok((Point::new(r.normal)?, r.offset)))
                .collect::<Result<Vec<_>>>()?;
            let cf = ConstraintFunction::new(Arc::new(MaxAffine::new(rows)?))
                .with_slater(Point::new(slater)?)?;
            Problem::new(parts_of(part, m)?, cf, "affine-polyhedron")
        }
        other => Err(Error::Config(format!(
            "{} is not a synthetic family",
            other.family()
        ))),
    }
}

/// Builds the problem a recipe describes and attaches its reference solution
/// with the certificate `ūᵢ = Tᵢ(x*)` when the oracle can compute one.
pub fn build(recipe: &ProblemRecipe) -> Result<Problem> {
    let resolved = recipe.resolve()?;
    let problem = match &resolved {
        ProblemRecipe::QuadraticBall { .. } | ProblemRecipe::AffinePolyhedron { .. } => {
            build_synthetic(&resolved)?
        }
        ProblemRecipe::A1 { target, center } => {
            let a = Point::new(target.clone())?;
            let c = match center {
                Some(c) => Point::new(c.clone())?,
                None => Point::zeros(a.dim()),
            };
            let t = subdiff(Arc::new(HalfSquaredDistance::unit(a)));
            let f = Arc::new(HalfSquaredDistance::unit(c.clone()));
            build_a1(
                t,
                f,
                0.0,
                DistanceRule::Exact(SetDescriptor::Ball {
                    center: c,
                    radius: 0.0,
                }),
            )?
        }
        ProblemRecipe::A2 { map, phi1, phi2 } => {
            build_a2(LinearMap::from_rows(map)?, phi1.build()?, phi2.build()?)?
        }
        ProblemRecipe::A3 { map, phi1, phi2 } => {
            build_a3(LinearMap::from_rows(map)?, phi1.build()?, phi2.build()?)?
        }
    };
    let problem = problem.with_recipe(resolved);
    match oracle::reference_solution(&problem) {
        Ok(xs) => {
            let cert = problem.operators().iter().map(|op| op.eval(&xs)).collect();
            problem.with_known_solution(xs, Some(cert))
        }
        Err(Error::Unsupported(_)) | Err(Error::Singular(_)) => Ok(problem),
        Err(e) => Err(e),
    }
}

/// The problem families used by the check suites and acceptance runs, with
/// their starting points.
pub fn shipped() -> Vec<(&'static str, ProblemRecipe, Point)> {
    let ball = |m: usize| ProblemRecipe::QuadraticBall {
        target: vec![2.0, 0.0],
        m,
        center: None,
        radius: 1.0,
    };
    let quad = |c: f64| FunctionSpec::HalfSquaredDistance {
        center: vec![c],
        weight: 1.0,
    };
    let origin = Point::zeros(2);
    vec![
        ("ball-m1", ball(1), origin.clone()),
        ("ball-m2", ball(2), origin.clone()),
        ("ball-m4", ball(4), origin.clone()),
        (
            "ball-interior",
            ProblemRecipe::QuadraticBall {
                target: vec![0.3, -0.2],
                m: 2,
                center: None,
                radius: 1.0,
            },
            Point::from_vec(vec![2.0, 2.0]),
        ),
        (
            "polyhedron",
            ProblemRecipe::AffinePolyhedron {
                dim: 2,
                matrix: Some(vec![vec![0.1, 1.0], vec![-1.0, 0.1]]),
                offset: Some(vec![-2.0, -1.0]),
                rows: None,
                slater: None,
                m: 1,
                seed: 0,
            },
            origin.clone(),
        ),
        (
            "a1",
            ProblemRecipe::A1 {
                target: vec![2.0, 0.0],
                center: None,
            },
            origin.clone(),
        ),
        (
            "a2",
            ProblemRecipe::A2 {
                map: vec![vec![2.0]],
                phi1: quad(0.0),
                phi2: quad(4.0),
            },
            Point::from_vec(vec![3.0, -2.0]),
        ),
        (
            "a3",
            ProblemRecipe::A3 {
                map: vec![vec![1.0]],
                phi1: quad(0.0),
                phi2: quad(0.0),
            },
            Point::from_vec(vec![1.0, 1.0]),
        ),
        (
            "a3-skew",
            ProblemRecipe::A3 {
                map: vec![vec![1.0]],
                phi1: FunctionSpec::Zero { dim: 1 },
                phi2: FunctionSpec::Zero { dim: 1 },
            },
            Point::from_vec(vec![0.5, 0.0]),
        ),
    ]
}
