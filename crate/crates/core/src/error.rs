//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while handling softbit streams.
#[derive(Debug, Error)]
pub enum Error {
    /// A high byte outside the softbit alphabet {0x7F, 0x81}.
    #[error("invalid softbit high byte 0x{0:02X}")]
    InvalidSoftbit(u8),

    /// Same as [`Error::InvalidSoftbit`], located within a stream.
    #[error("invalid softbit high byte 0x{hi:02X} in frame {frame}, word {word}")]
    InvalidSoftbitAt { hi: u8, frame: usize, word: usize },

    /// Stream byte length is not a whole number of frames.
    #[error("stream length {len} is not a multiple of the {frame_bytes}-byte frame size")]
    TruncatedStream { len: usize, frame_bytes: usize },

    /// A frame does not match the active stream geometry.
    #[error("frame geometry mismatch: {0}")]
    ConfigMismatch(String),

    /// Two sequences that must be equally long are not.
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    /// An operation required a canonical-form frame.
    #[error("frame is not in canonical form")]
    NotCanonical,

    /// Recovery needs embedded low bytes, but the frame does not carry them.
    #[error("frame is not in embedded form; low bytes are outside the softbit alphabet")]
    NotEmbedded,

    /// An operation that needs at least one frame got none.
    #[error("stream contains no frames")]
    EmptyStream,

    /// Received slots are not numbered consecutively.
    #[error("slot sequence gap: expected seq {expected}, found {found}")]
    SequenceGap { expected: usize, found: usize },

    /// Channel model parameters outside their valid domain.
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),

    /// An encoded stream does not follow the expected group layout.
    #[error("encoded stream layout mismatch: {0}")]
    LayoutMismatch(String),

    /// A loss-pattern file could not be parsed.
    #[error("invalid loss pattern file: {0}")]
    InvalidPattern(String),

    /// A configuration value or file could not be parsed.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Attach a frame index to a softbit error raised inside frame `frame`.
    pub(crate) fn in_frame(self, frame: usize) -> Error {
        match self {
            Error::InvalidSoftbit(hi) => Error::InvalidSoftbitAt { hi, frame, word: 0 },
            Error::InvalidSoftbitAt { hi, word, .. } => Error::InvalidSoftbitAt { hi, frame, word },
            other => other,
        }
    }
}
