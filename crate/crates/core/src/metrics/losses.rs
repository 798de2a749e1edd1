//! Spectral distances and least-squares adversarial objectives.

use realfft::num_complex::Complex64;

use crate::dsp::fft::RealFft;
use crate::dsp::mel::{log_mel, MelFilterbank};
use crate::dsp::stft::{hann_periodic, magnitude_stft, reflect, stft, StftConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::types::SAMPLE_RATE;

/// Weight applied to every L1 distance term.
pub const L1_WEIGHT: f64 = 0.5;

/// Mel distance analysis: 2048-point window, 512 hop, 80 bands over 0–24 kHz.
pub const MEL_WINDOW: usize = 2048;
pub const MEL_HOP: usize = 512;
pub const MEL_BANDS: usize = 80;
pub const MEL_FLOOR: f64 = 1e-5;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "signals differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Weighted per-configuration distances `0.5 * mean | |A| - |B| |`.
pub fn l1_spectral_terms(a: &[f64], b: &[f64], cfgs: &[StftConfig]) -> Result<Vec<f64>> {
    check_lengths(a, b)?;
    cfgs.iter()
        .map(|&cfg| {
            let ma = magnitude_stft(a, cfg)?;
            let mb = magnitude_stft(b, cfg)?;
            Ok(L1_WEIGHT * mean_abs_diff(ma.as_slice(), mb.as_slice()))
        })
        .collect()
}

/// Mean over configurations of the weighted linear-magnitude L1 distance.
pub fn l1_spectral_loss(a: &[f64], b: &[f64], cfgs: &[StftConfig]) -> Result<f64> {
    if cfgs.is_empty() {
        return Err(Error::Config("at least one STFT configuration is required".into()));
    }
    let terms = l1_spectral_terms(a, b, cfgs)?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// [`l1_spectral_loss`] and its gradient with respect to `a`. Bins where
/// either magnitude is zero, or the magnitudes are equal, contribute zero.
pub fn l1_spectral_loss_grad(a: &[f64], b: &[f64], cfgs: &[StftConfig]) -> Result<(f64, Vec<f64>)> {
    let loss = l1_spectral_loss(a, b, cfgs)?;
    let mut grad = vec![0.0; a.len()];
    let n_cfg = cfgs.len() as f64;
    for &cfg in cfgs {
        let sa = stft(a, cfg)?;
        let sb = stft(b, cfg)?;
        let count = (sa.len() * cfg.bins()) as f64;
        let scale = L1_WEIGHT / (count * n_cfg);
        let n = cfg.fft_size;
        let fft = RealFft::new(n)?;
        let window = hann_periodic(cfg.window_length);
        let offset = (n - cfg.window_length) / 2;
        let mut z = vec![Complex64::new(0.0, 0.0); cfg.bins()];
        let mut frame_grad = vec![0.0; n];
        for (i, (xa, xb)) in sa.iter().zip(&sb).enumerate() {
            // d|X_k|/dv_m = Re(conj(X_k) e^{-2 pi i k m / N}) / |X_k|; summed over the
            // half spectrum this is an inverse real FFT of suitably scaled X_k/|X_k|
            for (k, (zk, (ca, cb))) in z.iter_mut().zip(xa.iter().zip(xb)).enumerate() {
                let (ma, mb) = (ca.norm(), cb.norm());
                *zk = if ma > 0.0 && ma != mb {
                    let sign = if ma > mb { 1.0 } else { -1.0 };
                    let mult = if k == 0 || k == n / 2 { n as f64 } else { n as f64 / 2.0 };
                    ca / ma * (sign * scale * mult)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            // the imaginary parts of DC and Nyquist contribute nothing here either
            fft.inverse_into(&z, &mut frame_grad)?;
            let start = (i * cfg.hop) as isize - (n / 2) as isize;
            for (j, &w) in window.iter().enumerate() {
                let pos = start + (offset + j) as isize;
                grad[reflect(pos, a.len())] += w * frame_grad[offset + j];
            }
        }
    }
    Ok((loss, grad))
}

/// Mean absolute difference of two equally shaped matrices, unweighted.
pub fn mel_l1_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(mean_abs_diff(a.as_slice(), b.as_slice()))
}

/// Log-mel spectrogram used by [`mel_l1_loss`].
pub fn loss_log_mel(x: &[f64]) -> Result<Matrix> {
    let cfg = StftConfig::square(MEL_WINDOW, MEL_HOP)?;
    let bank = MelFilterbank::new(MEL_BANDS, MEL_WINDOW, SAMPLE_RATE, 0.0, f64::from(SAMPLE_RATE) / 2.0)?;
    log_mel(x, cfg, &bank, MEL_FLOOR)
}

/// Weighted L1 distance between 80-band log-mel spectrograms.
pub fn mel_l1_loss(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    Ok(L1_WEIGHT * mel_l1_distance(&loss_log_mel(a)?, &loss_log_mel(b)?)?)
}

/// Least-squares GAN objectives over one score map pair:
/// `d = mean((r - 1)^2) + mean(f^2)`, `g = mean((f - 1)^2)`.
pub fn lsgan_losses(real: &Matrix, fake: &Matrix) -> Result<(f64, f64)> {
    if real.rows() != fake.rows() || real.cols() != fake.cols() {
        return Err(Error::Shape(format!(
            "score maps differ: {}x{} vs {}x{}",
            real.rows(),
            real.cols(),
            fake.rows(),
            fake.cols()
        )));
    }
    let n = real.as_slice().len().max(1) as f64;
    let d_real = real.as_slice().iter().map(|r| (r - 1.0).powi(2)).sum::<f64>() / n;
    let d_fake = fake.as_slice().iter().map(|f| f * f).sum::<f64>() / n;
    let g = fake.as_slice().iter().map(|f| (f - 1.0).powi(2)).sum::<f64>() / n;
    Ok((d_real + d_fake, g))
}

/// Ensemble objectives: per-submodel losses summed.
pub fn lsgan_ensemble(real: &[Matrix], fake: &[Matrix]) -> Result<(f64, f64)> {
    if real.len() != fake.len() {
        return Err(Error::Shape(format!(
            "{} real score maps vs {} fake",
            real.len(),
            fake.len()
        )));
    }
    real.iter().zip(fake).try_fold((0.0, 0.0), |(d, g), (r, f)| {
        let (dr, gr) = lsgan_losses(r, f)?;
        Ok((d + dr, g + gr))
    })
}
