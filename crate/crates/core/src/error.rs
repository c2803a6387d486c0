use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unfolding index {k} out of range for a tensor of order {order}")]
    UnfoldIndex { k: usize, order: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("multi-index {index:?} out of range for shape {shape:?}")]
    IndexOutOfRange {
        index: Vec<usize>,
        shape: Vec<usize>,
    },

    #[error("dense tensor would hold {entries} entries (limit {limit})")]
    SizeGuard { entries: usize, limit: usize },

    #[error("infeasible TT rank {ranks:?} for shape {shape:?}")]
    InfeasibleRank {
        ranks: Vec<usize>,
        shape: Vec<usize>,
    },

    #[error("invalid rank vector: {0}")]
    InvalidRank(String),

    #[error("cannot normalize a tensor of norm {0:e}")]
    ZeroNorm(f64),

    #[error("effective rank {effective:?} is below the requested rank {requested:?}")]
    RankDeficient {
        requested: Vec<usize>,
        effective: Vec<usize>,
    },

    #[error("tangent vectors live at different base points")]
    BaseMismatch,

    #[error("non-finite objective value")]
    NonFinite,

    #[error("line search failed after {0} backtracks")]
    LineSearchFailed(usize),

    #[error("operator is not Hermitian")]
    NotHermitian,

    #[error("local eigensolve failed: {0}")]
    Eigensolve(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("channel is not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
