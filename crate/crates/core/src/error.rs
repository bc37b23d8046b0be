//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank-deficient matrix: {0}")]
    RankDeficient(String),

    /// The generator matrix spans less than the ambient dimension. Per the
    /// degenerate-boundary rule the caller must treat the zonotope itself as
    /// its boundary.
    #[error("zonotope is not full-dimensional (rank {rank} < dimension {dim})")]
    NotFullDimensional { rank: usize, dim: usize },

    /// The LP kernel gave up (iteration cap); distinct from `Infeasible`,
    /// which is an ordinary outcome.
    #[error("linear-program solver failure: {0}")]
    SolverFailure(String),

    /// Contraction cannot separate the candidate from a boundary piece
    /// without emptying it; the caller should reduce the step size or raise
    /// the boundary budget.
    #[error("contraction collapsed: {0}")]
    ContractionCollapse(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// Interval evaluation left the domain of an operation (division by an
    /// interval containing zero, square root of a negative interval). The
    /// caller must shrink the enclosure.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("a-priori enclosure failed: {0}")]
    Enclosure(String),

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
