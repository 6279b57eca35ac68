use thiserror::Error;

/// Errors raised by the estimation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("metric space has no points")]
    EmptySpace,

    #[error("distance matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },

    #[error("non-finite distance at ({0}, {1})")]
    NonFiniteDistance(usize, usize),

    #[error("negative distance at ({0}, {1})")]
    NegativeDistance(usize, usize),

    #[error("distance matrix is asymmetric at ({0}, {1})")]
    AsymmetricMatrix(usize, usize),

    #[error("nonzero diagonal entry at point {0}")]
    NonzeroDiagonal(usize),

    #[error("triangle inequality violated: d({0},{1}) > d({0},{2}) + d({2},{1})")]
    TriangleViolation(usize, usize, usize),

    #[error("all distances are zero; the space has no diameter to normalize")]
    DegenerateSpace,

    #[error("line coordinates must be finite and sorted ascending (violation at index {0})")]
    UnsortedLine(usize),

    #[error("point {index} has dimension {found}, expected {expected}")]
    PointDimension {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("operation requires a line metric")]
    NotALine,

    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite function value at point {0}")]
    NonFiniteValue(usize),

    #[error("invalid sampling distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid slack vector: {0}")]
    InvalidSlack(String),

    #[error("relaxed Lipschitz condition violated between points {0} and {1}")]
    RelaxedConditionViolated(usize, usize),

    #[error("instance has {n} points; the exact oracle is capped at {cap}")]
    InstanceTooLarge { n: usize, cap: usize },

    #[error("line DP needs about {states} states, over the cap of {cap}; raise gamma")]
    GridTooFine { states: u128, cap: u128 },

    #[error("discretized class has about {estimate:.3e} members, over the cap of {cap}")]
    ClassTooLarge { estimate: f64, cap: u64 },

    #[error("function is not in the discretized class: {0}")]
    NotInClass(String),

    #[error("the game has no constraint rows")]
    EmptyConstraintSet,

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("argument out of domain: {0}")]
    DomainError(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
