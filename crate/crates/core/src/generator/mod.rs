//! The generator forward pass: frame-rate convolutions, resampling to the
//! pulse rate, a pulse-rate convolution, a wide projection to complex pulse
//! spectra, inverse FFT to fragments and overlap-add.

pub mod conv;
pub mod model;
pub mod project;
pub mod spectra;
pub mod stream;
pub mod synth;

pub use conv::{conv1d, conv_step};
pub use model::{ConvLayer, GeneratorModel, ModelConfig, FFT_LEN};
pub use project::{project_sparse, BlockMask, Projection};
pub use spectra::{fragments_from_spectra, FragmentSpectra, FragmentSynth};
pub use stream::{synthesize_streaming, EmissionCheckpoint, StreamReport, StreamingSynth};
pub use synth::{synthesize, synthesize_counted};

/// Multiply-add counter filled in by the learned layers. Biases,
/// activations, FFTs and overlap-add are not counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    /// Frame-rate and pulse-rate convolutions.
    pub conv_macs: u64,
    /// Output projection; only kept blocks count when sparse.
    pub proj_macs: u64,
}

impl OpCount {
    pub fn macs(&self) -> u64 {
        self.conv_macs + self.proj_macs
    }

    /// Multiply and add counted separately.
    pub fn flops(&self) -> u64 {
        2 * self.macs()
    }
}
