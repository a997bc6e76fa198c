use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("undefined cosine: zero vector")]
    UndefinedCosine,

    #[error("undefined correlation: constant vector")]
    UndefinedCorrelation,

    #[error("token `{0}` missing from embedding space")]
    MissingToken(String),

    #[error("target unseen in period: `{token}` has no vector for period {period}")]
    TargetUnseenInPeriod { token: String, period: usize },

    #[error("not enough neighbours: need {needed}, space has {available}")]
    NotEnoughNeighbours { needed: usize, available: usize },

    #[error("no target words given")]
    NoTargets,

    #[error("all targets skipped")]
    AllTargetsSkipped,

    #[error("insufficient targets: need at least {needed}, got {actual}")]
    InsufficientTargets { needed: usize, actual: usize },

    #[error("degenerate similarity set: all scores equal")]
    DegenerateSimilaritySet,

    #[error("no candidates to select from")]
    NoCandidates,

    #[error("prediction does not cover gold targets: {}", .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSynthSpec(String),
}
