use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph contains a directed cycle")]
    Cycle,
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("duplicate node name `{0}`")]
    DuplicateName(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("node index {index} out of range for graph with {n} nodes")]
    InvalidIndex { index: usize, n: usize },
    #[error("node sets must be pairwise disjoint ({0})")]
    OverlappingSets(String),
    #[error("{what} exceeds limit: {size} > {limit}")]
    LimitExceeded {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("zero-probability evidence: {0}")]
    ZeroProbability(String),
    #[error("overlap violation in stratum {0}")]
    OverlapViolation(String),
    #[error("positivity violation: {0}")]
    Positivity(String),
    #[error("mechanism of `{0}` cannot be abducted (not additive, noise-invertible, or finite-support)")]
    NonAbducible(String),
    #[error("evidence inconsistent with model: {0}")]
    InconsistentEvidence(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("weak instrument: first-stage |t| = {t_stat:.3} below threshold {threshold}")]
    WeakInstrument { t_stat: f64, threshold: f64 },
    #[error("logistic regression did not converge (separation detected)")]
    Separation,
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures caused by the data or model violating a method's
    /// identification or estimation preconditions, as opposed to malformed
    /// input.
    pub fn is_precondition_failure(&self) -> bool {
        matches!(
            self,
            Error::ZeroProbability(_)
                | Error::OverlapViolation(_)
                | Error::Positivity(_)
                | Error::NonAbducible(_)
                | Error::InconsistentEvidence(_)
                | Error::Singular(_)
                | Error::InsufficientData(_)
                | Error::WeakInstrument { .. }
                | Error::Separation
                | Error::EmptyGroup(_)
                | Error::Degenerate(_)
                | Error::LimitExceeded { .. }
        )
    }
}
