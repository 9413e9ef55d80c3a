use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("matrix is not skew-symmetric (|M + M^T|_F = {0:e})")]
    NotSkewSymmetric(f64),
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    Shape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("bottom block rows are not [0 | I]")]
    BadBlockStructure,
    #[error("rotation block is not orthonormal (|R^T R - I|_F = {0:e})")]
    NotRotation(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("time step must be positive, got {0}")]
    InvalidDt(f64),
    #[error("innovation covariance is singular (condition number {0:e})")]
    SingularInnovation(f64),
    #[error("non-finite value in filter {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("`{0}` must be strictly positive")]
    NonPositive(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    /// Attaches a line number to a value error.
    pub fn at_line(self, line: usize) -> Self {
        match self {
            ConfigError::Invalid(msg) => ConfigError::Parse { line, msg },
            other => other,
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}: row {row}: {msg}")]
    BadRow {
        file: String,
        row: usize,
        msg: String,
    },
    #[error("{0}")]
    Inconsistent(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("empty log")]
    EmptyLog,
    #[error("logs are not time-aligned: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
