use thiserror::Error;

/// Errors raised across the crate.
///
/// Data-level findings (validation violations, failing terminals, failing
/// inequalities) are returned as report values, not as errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus {0} is not prime (only prime fields are supported)")]
    CompositeModulus(u64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("field mismatch: GF({left}) vs GF({right})")]
    FieldMismatch { left: u32, right: u32 },

    #[error("entry {value} out of range for GF({p})")]
    EntryOutOfRange { value: u64, p: u32 },

    #[error("network contains a cycle through nodes {0:?}")]
    CycleDetected(Vec<String>),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("unknown edge `{0}`")]
    UnknownEdge(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("m must be at least 2, got {0}")]
    InvalidM(usize),

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("edge `{0}` has no local map for any input of its tail")]
    UncoveredEdge(String),

    #[error("local map for edge `{edge}` from `{input}`: {reason}")]
    InvalidLocalMap {
        edge: String,
        input: String,
        reason: String,
    },

    #[error("unknown message reference `{0}`")]
    UnknownMessageRef(String),

    #[error("search budget must be at least 1")]
    BudgetZero,

    #[error("search space too large: {0}")]
    SearchSpaceTooLarge(String),

    #[error("search produced a code that does not verify (internal invariant broken)")]
    UnsoundResult,

    #[error("incomplete rank table: expected {expected} entries, found {found}")]
    IncompleteTable { expected: usize, found: usize },

    #[error("ground set of size {0} is too large for a full table (max 20)")]
    GroundSetTooLarge(usize),

    #[error("ambient mismatch: {0}")]
    AmbientMismatch(String),

    #[error("mapping is partial: no image for `{0}`")]
    PartialMapping(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("code is not a solution of the network")]
    NotASolution,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl<E: std::fmt::Display> From<serde_path_to_error::Error<E>> for Error {
    fn from(err: serde_path_to_error::Error<E>) -> Self {
        let path = err.path().to_string();
        Error::Schema {
            path,
            message: err.inner().to_string(),
        }
    }
}
