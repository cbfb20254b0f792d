//! Error types shared by every module of the simulator.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input dimensions or values violate an operation's geometry contract.
    #[error("geometry: {0}")]
    Geometry(String),

    /// A MAC PDU would not fit the 11-bit length field.
    #[error("length overflow: PDU of {len} bytes exceeds the 2047-byte limit")]
    LengthOverflow { len: usize },

    /// Header check sequence did not verify on parse.
    #[error("hcs mismatch: expected {expected:#04x}, actual {actual:#04x}")]
    HcsMismatch { expected: u8, actual: u8 },

    /// Payload CRC-32 did not verify on parse.
    #[error("payload crc mismatch: expected {expected:#010x}, actual {actual:#010x}")]
    CrcMismatch { expected: u32, actual: u32 },

    /// Fewer bits supplied than the structure requires.
    #[error("truncated input: need {needed} bits, got {got}")]
    TruncatedInput { needed: usize, got: usize },

    /// An LFSR was seeded with the all-zero fixed point.
    #[error("degenerate seed: all-zero shift register state")]
    DegenerateSeed,

    /// A channel profile failed validation or could not be parsed.
    #[error("channel profile: {0}")]
    Profile(String),

    /// A sample stream ended before the requested number of symbols.
    #[error("truncated stream: need {needed} samples, got {got}")]
    TruncatedStream { needed: usize, got: usize },

    /// Capture file ends inside the fixed-size header.
    #[error("truncated capture header: {got} bytes, need {needed}")]
    TruncatedHeader { got: usize, needed: usize },

    /// Capture file does not start with the expected magic tag.
    #[error("bad capture magic at byte 0: {found:02x?}")]
    BadMagic { found: [u8; 8] },

    /// Capture file declares an unsupported format version.
    #[error("unsupported capture version {found} at byte 8 (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    /// Capture payload is shorter than its header declares.
    #[error("truncated capture payload at byte {offset}: header declares {declared} samples, payload holds {actual}")]
    TruncatedPayload {
        offset: u64,
        declared: u64,
        actual: u64,
    },

    /// Run configuration file is malformed.
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
