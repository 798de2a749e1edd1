//! Runtime for a pitch-synchronous ISTFT neural vocoder.
//!
//! The generator runs at three rates: a fixed 100 Hz feature frame rate, a
//! variable glottal pulse rate derived from F0, and the 48 kHz output rate.
//! Neural layers only run at the first two. Pulse-rate spectra are turned into
//! waveform fragments by an inverse real FFT and assembled with asymmetric
//! Hann windows by overlap-add.
//!
//! Besides synthesis (batch and streaming) the crate carries the spectral
//! losses and frequency-domain discriminator forward pass used to score
//! copy-synthesis output, and a FLOP accounting engine for convolutional
//! vocoder architectures.

pub mod complexity;
pub mod dsp;
pub mod error;
pub mod generator;
pub mod linalg;
pub mod metrics;
pub mod pulse;
pub mod transport;
pub mod types;

pub use error::{Error, FeatureViolation, Result};
pub use generator::{synthesize, GeneratorModel, OpCount, StreamingSynth};
pub use pulse::{mean_pulse_rate, pulses_from_f0};
pub use transport::{OlaOp, ResampleOp};
pub use types::{FeatureTrack, PulseTrack, Waveform};
