use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("channel `{name}` not found (available: {})", candidates.join(", "))]
    ChannelNotFound { name: String, candidates: Vec<String> },

    #[error("channel `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("backward called before forward")]
    NoForwardPass,

    #[error("training diverged: non-finite loss in {stage} at epoch {epoch}")]
    Diverged { stage: &'static str, epoch: usize },

    #[error("all epochs rejected")]
    AllRejected,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    #[error("truncated tensor `{0}`")]
    TruncatedTensor(String),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("tensor `{name}` dims {dims:?} do not match {expected:?}")]
    DimMismatch { name: String, dims: Vec<usize>, expected: Vec<usize> },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
