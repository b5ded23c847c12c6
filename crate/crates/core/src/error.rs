use thiserror::Error;

/// Library error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unit error: {0}")]
    Unit(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category used by the CLI.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Config(_) => "config",
            Error::Unit(_) => "unit",
            Error::Convergence(_) => "convergence",
            Error::Eigen(_) => "eigensolver",
            Error::Analysis(_) => "analysis",
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
        }
    }

    /// Process exit code for the category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::Unit(_) => 2,
            Error::Convergence(_) | Error::Eigen(_) => 3,
            Error::Analysis(_) => 4,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
