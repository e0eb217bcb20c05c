use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid tuple {tuple:?}: {reason}")]
    InvalidTuple { tuple: Vec<usize>, reason: String },

    #[error("argument {value} out of range [0, {dim})")]
    InvalidArgument { value: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("columns are not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("target state has no overlap with the configuration subspace")]
    NoOverlap,

    #[error("M = {0} is odd; an odd orbital count wastes one orbital for two fermions, use M - 1")]
    OddOrbitalCount(usize),

    #[error("input matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("input is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Config problems vs. numerical problems, for CLI exit codes.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::InvalidDimension(_)
                | Error::OddOrbitalCount(_)
                | Error::Io(_)
        )
    }
}
