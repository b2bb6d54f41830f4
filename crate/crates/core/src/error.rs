use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported modulation order {0} (expected 16, 64, 256 or 1024)")]
    UnsupportedOrder(u32),
    #[error("spread factor {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("spread factor must be positive for {0}")]
    ZeroAlpha(&'static str),
    #[error("center amplitude must be positive and finite, got {0}")]
    InvalidAmplitude(f64),
    #[error("point classification needs alpha = 1, got {0}")]
    ClassificationOffGrid(f64),
    #[error("noise variance must be positive and finite, got {0}")]
    InvalidNoiseVariance(f64),
    #[error("frame does not fit a {order}-point constellation: {reason}")]
    FrameMismatch { order: u32, reason: String },
    #[error("bit value {0} is not 0 or 1")]
    InvalidBit(u8),
    #[error("index {0} does not fit in 8 bits")]
    IndexOutOfRange(u32),
    #[error("non-finite weight {0}")]
    NonFiniteWeight(f32),
    #[error("duplicate index {0} in record")]
    DuplicateIndex(u32),
    #[error("bit length {0} is not a multiple of {1}")]
    BitLength(usize, usize),
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("symbol ({0}, {1}) is not a constellation point")]
    OffConstellation(f64, f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
