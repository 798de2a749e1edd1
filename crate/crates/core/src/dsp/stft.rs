//! Short-time Fourier analysis with centered, reflect-padded frames.
//!
//! Frame `i` is centered on sample `i * hop`. The signal is extended by
//! `fft_size / 2` samples of mirror reflection on each side (edge sample not
//! repeated), and a periodic Hann window of `window_length` sits in the
//! middle of each `fft_size` frame. There are `1 + len / hop` frames.

use realfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::fft::RealFft;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl StftConfig {
    pub fn new(window_length: usize, hop: usize, fft_size: usize) -> Result<Self> {
        let cfg = Self {
            window_length,
            hop,
            fft_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Window and FFT of the same length.
    pub fn square(window_length: usize, hop: usize) -> Result<Self> {
        Self::new(window_length, hop, window_length)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_length {
            return Err(Error::Config(format!(
                "hop {} must be in 1..={}",
                self.hop, self.window_length
            )));
        }
        if self.fft_size < self.window_length {
            return Err(Error::Config(format!(
                "fft size {} is shorter than the window {}",
                self.fft_size, self.window_length
            )));
        }
        if !self.fft_size.is_power_of_two() {
            return Err(Error::FftLength(self.fft_size));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn n_frames(&self, len: usize) -> usize {
        1 + len / self.hop
    }

    /// Frequency in Hz of bin `k` at `sample_rate`.
    pub fn bin_hz(&self, k: usize, sample_rate: u32) -> f64 {
        k as f64 * f64::from(sample_rate) / self.fft_size as f64
    }
}

/// The six multi-resolution (window, hop) pairs used for linear-magnitude
/// distances.
pub fn l1_loss_configs() -> Vec<StftConfig> {
    [
        (256, 64),
        (512, 128),
        (1024, 256),
        (2048, 512),
        (4096, 1024),
        (8192, 2048),
    ]
    .into_iter()
    .map(|(w, h)| StftConfig {
        window_length: w,
        hop: h,
        fft_size: w,
    })
    .collect()
}

/// `0.5 - 0.5 cos(2 pi n / N)`, the DFT-even Hann window.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Index into `x` for a position that may lie outside `[0, len)`, reflecting
/// about the first and last samples as often as needed.
pub(crate) fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Windowed, padded analysis frames shared by the complex and magnitude paths.
struct Framer {
    cfg: StftConfig,
    window: Vec<f64>,
    offset: usize,
    fft: RealFft,
}

impl Framer {
    fn new(cfg: StftConfig, len: usize) -> Result<Self> {
        cfg.validate()?;
        if len < cfg.window_length {
            return Err(Error::SignalTooShort {
                len,
                window: cfg.window_length,
            });
        }
        Ok(Self {
            cfg,
            window: hann_periodic(cfg.window_length),
            offset: (cfg.fft_size - cfg.window_length) / 2,
            fft: RealFft::new(cfg.fft_size)?,
        })
    }

    fn frame(&self, x: &[f64], i: usize, buf: &mut [f64], out: &mut [Complex64]) -> Result<()> {
        let half = (self.cfg.fft_size / 2) as isize;
        let start = (i * self.cfg.hop) as isize - half;
        buf.fill(0.0);
        for (j, &w) in self.window.iter().enumerate() {
            let n = start + (self.offset + j) as isize;
            buf[self.offset + j] = w * x[reflect(n, x.len())];
        }
        self.fft.forward_into(buf, out)
    }
}

/// Complex STFT, frames × bins.
pub fn stft(x: &[f64], cfg: StftConfig) -> Result<Vec<Vec<Complex64>>> {
    let framer = Framer::new(cfg, x.len())?;
    let mut buf = vec![0.0; cfg.fft_size];
    (0..cfg.n_frames(x.len()))
        .map(|i| {
            let mut out = vec![Complex64::new(0.0, 0.0); cfg.bins()];
            framer.frame(x, i, &mut buf, &mut out)?;
            Ok(out)
        })
        .collect()
}

/// |STFT|, frames × bins.
pub fn magnitude_stft(x: &[f64], cfg: StftConfig) -> Result<Matrix> {
    let framer = Framer::new(cfg, x.len())?;
    let n_frames = cfg.n_frames(x.len());
    let mut buf = vec![0.0; cfg.fft_size];
    let mut spec = vec![Complex64::new(0.0, 0.0); cfg.bins()];
    let mut out = Matrix::zeros(n_frames, cfg.bins());
    for i in 0..n_frames {
        framer.frame(x, i, &mut buf, &mut spec)?;
        for (o, c) in out.row_mut(i).iter_mut().zip(&spec) {
            *o = c.norm();
        }
    }
    Ok(out)
}
