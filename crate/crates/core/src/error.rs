use thiserror::Error;

/// Failure modes shared by every module.
///
/// The variants fall into four classes that the command-line front end maps
/// onto distinct exit codes: invalid input, unsupported parameter
/// combinations, numerical failure, and decision ambiguity.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero right-hand side: b must be nonzero")]
    ZeroRhs,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("inconsistent system: Ax = b has no solution (least-squares residual {residual:e})")]
    InconsistentSystem { residual: f64 },

    #[error("enumeration cap exceeded: {needed} > {cap}")]
    CapExceeded { needed: u128, cap: u128 },

    #[error("linearly dependent columns on support {0:?}")]
    DependentColumns(Vec<usize>),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("divergence guard: objective increased from {before:e} to {after:e}")]
    Divergence { before: f64, after: f64 },

    #[error("ambiguous decision: {0}")]
    Ambiguous(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable tag used in machine-parsable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Json(_) => "json",
            Error::Dimension(_) => "dimension",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::ZeroRhs => "zero_rhs",
            Error::Unsupported(_) => "unsupported",
            Error::Infeasible(_) => "infeasible",
            Error::InconsistentSystem { .. } => "inconsistent_system",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::DependentColumns(_) => "dependent_columns",
            Error::SizeLimit(_) => "size_limit",
            Error::Divergence { .. } => "divergence",
            Error::Ambiguous(_) => "ambiguous",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
