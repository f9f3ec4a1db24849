use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("field does not match the graph: {0}")]
    Shape(String),
    #[error("field is nonzero on {count} forbidden vertices (first at {first})")]
    ConstraintViolation { count: usize, first: String },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("no seed produced a candidate: {0}")]
    NoCandidate(String),
    #[error("descent stagnated: {0}")]
    Stagnation(String),
    #[error("newton refinement failed: {0}")]
    RefinementFailure(String),
    #[error("incomplete report: {0}")]
    ReportIncomplete(String),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported solution format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the failure comes from the numerics rather than from the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::NoCandidate(_)
                | Error::Stagnation(_)
                | Error::RefinementFailure(_)
                | Error::ReportIncomplete(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
