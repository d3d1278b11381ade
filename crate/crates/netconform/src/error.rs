//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants distinguish the
//! failure classes callers may want to branch on (parameter validation,
//! rank deficiency, linear-solve failure, …); the CLI additionally maps each
//! variant to a stable machine-readable code for run manifests.

/// Errors produced by generation, fitting, calibration, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A matrix had lower rank than the operation requires.
    #[error("rank deficiency: {0}")]
    Rank(String),

    /// A linear system was singular or too ill-conditioned to trust.
    #[error("linear solve failed: {0}")]
    Solve(String),

    /// Model fitting failed (distinct from rank problems in the design).
    #[error("model fit failed: {0}")]
    Fit(String),

    /// Every candidate in a model-selection search was degenerate.
    #[error("selection failed: {0}")]
    Selection(String),

    /// Input was structurally degenerate (e.g. empty calibration set).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A text input failed to parse; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The run configuration was missing or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// An underlying LAPACK routine reported failure.
    #[error("{routine} returned info={info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code for manifests and exit diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Rank(_) => "rank",
            Error::Solve(_) => "solve",
            Error::Fit(_) => "fit",
            Error::Selection(_) => "selection",
            Error::Degenerate(_) => "degenerate",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Lapack { .. } => "lapack",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
