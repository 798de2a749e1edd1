//! Signal-processing kernels: real FFT, STFT analysis, mel filterbanks and
//! MFCC extraction, WAV I/O.

pub mod fft;
pub mod mel;
pub mod stft;
pub mod wav;

pub use fft::{irfft, rfft, RealFft};
pub use mel::{extract_features, log_mel, mfcc, MelFilterbank, MfccConfig};
pub use stft::{hann_periodic, l1_loss_configs, magnitude_stft, stft, StftConfig};
pub use wav::{read_wav, write_wav, SampleFormat};
