use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which feature-frame invariant was violated.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureViolation {
    FrameWidth { got: usize },
    F0Range { f0: f32 },
    Voicing { value: f32 },
    NonFinite { index: usize },
}

impl fmt::Display for FeatureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FrameWidth { got } => write!(f, "frame_width: expected 32 values, got {got}"),
            Self::F0Range { f0 } => write!(f, "f0_range: {f0} Hz outside [50, 400]"),
            Self::Voicing { value } => write!(f, "voicing: {value} is not 0 or 1"),
            Self::NonFinite { index } => write!(f, "non_finite: value {index} is not finite"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid feature frame {frame}: {violation}")]
    InvalidFeature { frame: usize, violation: FeatureViolation },

    #[error("invalid pulse track: {0}")]
    InvalidPulses(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("bad model file: {0}")]
    ModelFormat(String),

    #[error("bad OLA operator payload: {0}")]
    OlaFormat(String),

    #[error("bad feature file: {0}")]
    FeatureFormat(String),

    #[error("window half-length {half} exceeds F/2 = {limit}")]
    WindowTooWide { half: usize, limit: usize },

    #[error("FFT length {0} is not a power of two")]
    FftLength(usize),

    #[error("signal of {len} samples is shorter than one analysis window of {window}")]
    SignalTooShort { len: usize, window: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("feature source ended mid-utterance after {frames} frames: {reason}")]
    Starved { frames: usize, reason: String },

    #[error("too few pulses: need at least {needed}, got {got}")]
    TooFewPulses { needed: usize, got: usize },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
