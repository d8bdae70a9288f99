use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the core algorithms can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed line at {position}: {reason}")]
    MalformedLine { position: usize, reason: String },
    #[error("summary bucket of {bucket}s does not divide bin width {bin}s")]
    IncompatibleBucket { bucket: u64, bin: u64 },
    #[error("row has zero standard deviation")]
    DegenerateRow,
    #[error("no rows survived preprocessing")]
    EmptyResult,
    #[error("row mean is zero")]
    ZeroMean,
    #[error("profile requires a raw matrix, got a preprocessed one")]
    ProvenanceViolation,
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} distinct rows, have {available}")]
    TooFewRows { needed: usize, available: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("unknown cluster label {0}")]
    UnknownLabel(usize),
    #[error("no daily row falls inside a clustered week")]
    NoOverlap,
    #[error("unknown pattern `{0}`")]
    UnknownPattern(String),
    #[error("burstiness target {target} not reached within {steps} search steps")]
    Unreachable { target: f64, steps: usize },
    #[error("burstiness target {target} must exceed current burstiness {current}")]
    TargetNotAbove { target: f64, current: f64 },
    #[error("LM solution deviates from the linear least-squares solution by {0:e}")]
    FitMismatch(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
