use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row has zero norm")]
    ZeroRow,
    #[error("right-hand side has zero norm; use the absolute residual instead")]
    ZeroRhs,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("frequency ({0}, {1}) is outside the image frequency grid")]
    FrequencyOutOfRange(i64, i64),
    #[error("control sequence has no indices to choose from")]
    EmptySystem,
    #[error("block residual is nonzero but orthogonal to the block's row space")]
    InconsistentBlock,
    #[error("block has zero norm")]
    ZeroBlock,
    #[error("hyperplane does not meet the nonnegative orthant")]
    InfeasibleHyperplane,
    #[error("exact stepsize is only available for single-row steps (block of {0} rows)")]
    ExactStepOnBlock(usize),
    #[error("invalid regularization parameter {0}; must be finite and nonnegative")]
    InvalidLambda(f64),
    #[error("sparsity {sparsity} not in 1..={n}")]
    BadSparsity { sparsity: usize, n: usize },
    #[error("no sign pattern yields a feasible point; system is inconsistent")]
    NoFeasiblePattern,
    #[error("system is numerically singular")]
    SingularSystem,
    #[error("invalid block partition: {0}")]
    InvalidPartition(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
