use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}; only 2 and 4 are supported")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("basis labels are invalid: {0}")]
    InvalidLabels(String),

    #[error("operator is not Hermitian (deviation {0})")]
    NotHermitian(f64),

    #[error("operator is not unitary (deviation {0})")]
    NotUnitary(f64),

    #[error("operator is not an involution (deviation {0})")]
    NotInvolution(f64),

    #[error("observables do not commute (commutator norm {0})")]
    NonCommuting(f64),

    #[error("invalid tensor slot {0}; expected 1 or 2")]
    InvalidSlot(usize),

    #[error("invalid product: {0}")]
    InvalidProduct(String),

    #[error("unsatisfiable preparation: no value assignment meets the constraints")]
    Unsatisfiable,

    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),

    #[error("unknown time tag `{0}`")]
    UnknownTag(String),

    #[error("record impossible under this timeline")]
    ImpossibleRecord,

    #[error("outcome `{value}` does not fit event `{tag}`")]
    OutcomeKindMismatch { tag: String, value: String },

    #[error("combiner does not realize the specified routing: {0}")]
    InvalidCombiner(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
