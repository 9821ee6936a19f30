use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by kernels, mask construction, the encoder and the transducer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch ({detail})")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("{0}: empty input")]
    EmptyInput(&'static str),

    #[error("{op}: invalid argument ({detail})")]
    InvalidArgument { op: &'static str, detail: String },

    #[error("softmax: row {row} is fully masked")]
    FullyMaskedRow { row: usize },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("glu requires an even column count, got {cols}")]
    OddGluColumns { cols: usize },

    #[error("convolution kernel width must be odd, got {width}")]
    EvenKernel { width: usize },

    #[error("streaming requires a finite chunk size; got a full-context spec")]
    FullContextStream,

    #[error("streaming context does not match encoder config: {0}")]
    ContextMismatch(String),

    #[error("precision policy: accumulate width {accumulate:?} narrower than compute width {compute:?}")]
    NarrowAccumulate { compute: crate::kernel::FloatWidth, accumulate: crate::kernel::FloatWidth },

    #[error("token id {id} out of range for vocab size {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },

    #[error("targets must not contain the blank id")]
    BlankInTargets,

    #[error("brute-force path enumeration refused: lattice {t_len}x{u_len} exceeds the {max_t}x{max_u} guard")]
    BruteForceTooLarge { t_len: usize, u_len: usize, max_t: usize, max_u: usize },

    #[error("i/o: {0}")]
    Io(String),

    #[error("bad magic: expected {expected:?}, got {got:?}")]
    BadMagic { expected: [u8; 4], got: [u8; 4] },

    #[error("unsupported format version {got} (supported: {supported})")]
    UnsupportedVersion { got: u32, supported: u32 },

    #[error("truncated file while reading {0}")]
    Truncated(&'static str),

    #[error("malformed file: {0}")]
    Malformed(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated("stream")
        } else {
            Error::Io(e.to_string())
        }
    }
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch { op, detail: detail.into() }
    }

    pub(crate) fn arg(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument { op, detail: detail.into() }
    }
}
