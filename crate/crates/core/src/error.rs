use thiserror::Error;

/// Errors produced by the precoding library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no admissible regular support pattern for K={k}, N={n}, L={l}: {reason}")]
    NoAdmissiblePattern {
        k: usize,
        n: usize,
        l: usize,
        reason: &'static str,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("probability {0} outside the open interval (0, 1)")]
    InvalidProbability(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("target {target} exceeds the largest achievable in-cell probability {max}")]
    InfeasibleTarget { target: f64, max: f64 },
    #[error("target {target} is below the bracket floor {floor}; root lies beyond the search interval")]
    BracketFailure { target: f64, floor: f64 },
    #[error("channel matrix is rank deficient")]
    RankDeficient,
    #[error("channel matrix has zero norm")]
    ZeroChannel,
    #[error("constraint system has no active rows")]
    EmptySystem,
    #[error("zero diagonal entry in the triangular THP factor at position {0}")]
    ZeroDiagonal(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
