use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    First,
    Control,
    Second,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::First => "first stage",
            Stage::Control => "control variable",
            Stage::Second => "second stage",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate term `{0}`")]
    DuplicateTerm(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("design matrix is rank deficient; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("separation detected (max |eta| = {max_eta:.1})")]
    Separation { max_eta: f64 },
    #[error("level {level} of `{column}` is never observed")]
    UnobservedLevel { column: String, level: usize },
    #[error("unsupported link combination (y: {y}, w: {w}); {hint}")]
    UnsupportedCell { y: String, w: String, hint: String },
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("non-finite control variable at row {row}")]
    NonFiniteControl { row: usize },
    #[error("score Jacobian is singular (condition number {condition:.3e})")]
    SingularJacobian { condition: f64 },
    #[error("no closed-form Jacobian for {0}")]
    UnsupportedJacobian(String),
    #[error("{failed} of {total} bootstrap replicates failed")]
    BootstrapUnstable { failed: usize, total: usize },
    #[error("invalid generating parameters: {0}")]
    InvalidParams(String),
    #[error("accept-reject sampler exceeded {0} rejections for one draw")]
    EnvelopeFailure(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// The innermost error, with stage annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for solver and conditioning failures, false for bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::RankDeficient { .. }
                | Error::NonConvergence { .. }
                | Error::Separation { .. }
                | Error::NonFiniteControl { .. }
                | Error::SingularJacobian { .. }
                | Error::BootstrapUnstable { .. }
                | Error::EnvelopeFailure(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
