use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("points must have at least one coordinate")]
    EmptyPoint,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("halfspace with zero normal and negative offset {0} is empty")]
    EmptyHalfspace(f64),

    /// A zero subgradient at a point with c(y) > 0: the constraint has a
    /// positive minimum there and the feasible set is empty.
    #[error("constraint value {value} > 0 with zero subgradient: feasible set is empty")]
    InfeasibleConstraint { value: f64 },

    #[error("inner loop exceeded {iterations} iterations (distance bound {dist_bound} > target {target})")]
    IterationBudgetExceeded {
        iterations: usize,
        dist_bound: f64,
        target: f64,
    },

    #[error("iterate became non-finite at outer iteration {k}")]
    NonFiniteIterate { k: usize },

    #[error("operator list must not be empty")]
    EmptyOperatorList,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear system is singular: {0}")]
    Singular(&'static str),

    #[error("quadratic program has no feasible point")]
    InfeasibleQp,

    #[error("trace lacks the state snapshots required for auditing")]
    MissingSnapshots,
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
