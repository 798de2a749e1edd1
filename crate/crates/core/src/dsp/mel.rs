//! Mel filterbanks, log-mel spectrograms and MFCC features.
//!
//! MFCC frame `t` is centered on sample `(t + 0.5) * hop`, the same instant
//! as the feature frame centers used for pulse placement. The signal is
//! zero-extended where a window hangs over either end.

use realfft::num_complex::Complex64;

use crate::dsp::fft::RealFft;
use crate::dsp::stft::{hann_periodic, magnitude_stft, StftConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::types::{FeatureTrack, Waveform, F0_INDEX, FEATURE_DIM, N_MFCC, SAMPLE_RATE, VOICING_INDEX};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, unit peak, applied to a
/// magnitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Matrix,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Result<Self> {
        if n_mels == 0 || fmax <= fmin || fmin < 0.0 {
            return Err(Error::Config(format!(
                "mel filterbank needs n_mels > 0 and 0 <= fmin < fmax, got {n_mels}, {fmin}, {fmax}"
            )));
        }
        let bins = fft_size / 2 + 1;
        let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = Matrix::zeros(n_mels, bins);
        for m in 0..n_mels {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..bins {
                let f = k as f64 * f64::from(sample_rate) / fft_size as f64;
                let w = ((f - l) / (c - l)).min((r - f) / (r - c));
                if w > 0.0 {
                    weights.set(m, k, w);
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn n_mels(&self) -> usize {
        self.weights.rows()
    }

    pub fn bins(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn apply(&self, magnitude: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.weights.iter_rows()) {
            *o = row.iter().zip(magnitude).map(|(w, m)| w * m).sum();
        }
    }
}

/// Natural-log mel spectrogram, frames × n_mels, with values floored at `floor`.
pub fn log_mel(x: &[f64], cfg: StftConfig, bank: &MelFilterbank, floor: f64) -> Result<Matrix> {
    if bank.bins() != cfg.bins() {
        return Err(Error::Shape(format!(
            "filterbank has {} bins, STFT has {}",
            bank.bins(),
            cfg.bins()
        )));
    }
    let mag = magnitude_stft(x, cfg)?;
    let mut out = Matrix::zeros(mag.rows(), bank.n_mels());
    for t in 0..mag.rows() {
        let row = out.row_mut(t);
        bank.apply(mag.row(t), row);
        row.iter_mut().for_each(|v| *v = v.max(floor).ln());
    }
    Ok(out)
}

/// Orthonormal DCT-II basis, `n_out` × `n_in`.
fn dct_basis(n_out: usize, n_in: usize) -> Matrix {
    use std::f64::consts::PI;
    let mut m = Matrix::zeros(n_out, n_in);
    for k in 0..n_out {
        let scale = if k == 0 {
            (1.0 / n_in as f64).sqrt()
        } else {
            (2.0 / n_in as f64).sqrt()
        };
        for n in 0..n_in {
            m.set(k, n, scale * (PI * k as f64 * (n as f64 + 0.5) / n_in as f64).cos());
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccConfig {
    pub window_length: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub floor: f64,
    pub n_coeffs: usize,
    pub sample_rate: u32,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            window_length: 960,
            hop: 480,
            fft_size: 2048,
            n_mels: 80,
            fmin: 0.0,
            fmax: 24_000.0,
            floor: 1e-5,
            n_coeffs: N_MFCC,
            sample_rate: SAMPLE_RATE,
        }
    }
}

/// Cepstra for `len / hop` frames, frames × n_coeffs.
pub fn mfcc(x: &[f64], cfg: &MfccConfig) -> Result<Matrix> {
    if cfg.window_length > cfg.fft_size || cfg.hop == 0 || cfg.n_coeffs > cfg.n_mels {
        return Err(Error::Config(format!("inconsistent MFCC configuration {cfg:?}")));
    }
    let fft = RealFft::new(cfg.fft_size)?;
    let bank = MelFilterbank::new(cfg.n_mels, cfg.fft_size, cfg.sample_rate, cfg.fmin, cfg.fmax)?;
    let dct = dct_basis(cfg.n_coeffs, cfg.n_mels);
    let window = hann_periodic(cfg.window_length);

    let n_frames = x.len() / cfg.hop;
    let mut out = Matrix::zeros(n_frames, cfg.n_coeffs);
    let mut buf = vec![0.0; cfg.fft_size];
    let mut spec = vec![Complex64::new(0.0, 0.0); fft.bins()];
    let mut mag = vec![0.0; fft.bins()];
    let mut mel = vec![0.0; cfg.n_mels];
    for t in 0..n_frames {
        let start = (t * cfg.hop + cfg.hop / 2) as isize - (cfg.window_length / 2) as isize;
        buf.fill(0.0);
        for (j, &w) in window.iter().enumerate() {
            let n = start + j as isize;
            if n >= 0 && (n as usize) < x.len() {
                buf[j] = w * x[n as usize];
            }
        }
        fft.forward_into(&buf, &mut spec)?;
        for (m, c) in mag.iter_mut().zip(&spec) {
            *m = c.norm();
        }
        bank.apply(&mag, &mut mel);
        mel.iter_mut().for_each(|v| *v = v.max(cfg.floor).ln());
        for (k, o) in out.row_mut(t).iter_mut().enumerate() {
            *o = dct.row(k).iter().zip(&mel).map(|(a, b)| a * b).sum();
        }
    }
    Ok(out)
}

/// MFCCs of 48 kHz audio merged with an externally supplied F0 and voicing
/// track of one value per 10 ms frame.
pub fn extract_features(wave: &Waveform, f0: &[f32], voicing: &[f32]) -> Result<FeatureTrack> {
    let cfg = MfccConfig::default();
    if wave.sample_rate != cfg.sample_rate {
        return Err(Error::Config(format!(
            "feature extraction needs {} Hz audio, got {}",
            cfg.sample_rate, wave.sample_rate
        )));
    }
    let cep = mfcc(&wave.samples, &cfg)?;
    if f0.len() != cep.rows() || voicing.len() != cep.rows() {
        return Err(Error::Shape(format!(
            "audio gives {} frames but F0/voicing tracks have {}/{}",
            cep.rows(),
            f0.len(),
            voicing.len()
        )));
    }
    let frames = (0..cep.rows())
        .map(|t| {
            let mut frame = vec![0.0f32; FEATURE_DIM];
            for (d, &c) in frame.iter_mut().zip(cep.row(t)) {
                *d = c as f32;
            }
            frame[F0_INDEX] = f0[t];
            frame[VOICING_INDEX] = voicing[t];
            frame
        })
        .collect();
    FeatureTrack::try_new(frames)
}
