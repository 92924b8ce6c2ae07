use thiserror::Error;

/// Errors raised by the library.
///
/// Validation errors (bad shapes, out-of-range parameters) are kept apart from
/// solver failures so the CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sparsity level s={s} out of range 1..={k}")]
    SparsityOutOfRange { s: usize, k: usize },

    #[error("operator norm ({r},{theta}) is not efficiently computable")]
    IntractablePair { r: String, theta: String },

    #[error("matrix B is rank deficient (rank {rank} < {rows} rows)")]
    RankDeficient { rank: usize, rows: usize },

    #[error("operation requires a uniform block norm, structure has mixed norms")]
    MixedBlockNorms,

    #[error("condition violated, no bound: {0}")]
    ConditionViolated(String),

    #[error("combinatorial budget exceeded: {count} supports > {budget}")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("mutual block-incoherence is infinite (singular block Gram matrix)")]
    InfiniteIncoherence,

    #[error("program is infeasible: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Solver(_) | Error::Infeasible(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
