//! Textbook STFT magnitudes and MFCCs.

use std::f64::consts::PI;

use crate::naive::naive_dft;

/// `sin^2(pi n / N)`, equal to the periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| (PI * i as f64 / n as f64).sin().powi(2)).collect()
}

/// `x` extended by `pad` samples of mirror reflection on each side, folding
/// repeatedly when `pad` exceeds the signal length.
fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let len = x.len() as isize;
    let at = |mut i: isize| -> f64 {
        if len == 1 {
            return x[0];
        }
        loop {
            if i < 0 {
                i = -i;
            } else if i >= len {
                i = 2 * (len - 1) - i;
            } else {
                return x[i as usize];
            }
        }
    };
    (-(pad as isize)..len + pad as isize).map(at).collect()
}

/// |STFT| with frames centered on multiples of `hop`, frames × bins.
pub fn naive_stft_magnitude(x: &[f64], window_length: usize, hop: usize, fft_size: usize) -> Vec<Vec<f64>> {
    let padded = reflect_pad(x, fft_size / 2);
    let w = hann(window_length);
    let offset = (fft_size - window_length) / 2;
    let n_frames = 1 + x.len() / hop;
    (0..n_frames)
        .map(|i| {
            let mut buf = vec![0.0; fft_size];
            for j in 0..window_length {
                buf[offset + j] = w[j] * padded[i * hop + offset + j];
            }
            naive_dft(&buf)
                .into_iter()
                .map(|(re, im)| (re * re + im * im).sqrt())
                .collect()
        })
        .collect()
}

fn mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).ln() / std::f64::consts::LN_10
}

/// 30 MFCCs per 480-sample frame of 48 kHz audio: 960-sample Hann window
/// centered on `(t + 0.5) * 480` with zeros beyond the signal, 2048-point
/// magnitude spectrum, 80 triangular mel bands over 0–24 kHz, natural log
/// floored at 1e-5, orthonormal DCT-II.
pub fn naive_mfcc(x: &[f64]) -> Vec<Vec<f64>> {
    let (win, hop, nfft, n_mels, n_cep, sr) = (960usize, 480usize, 2048usize, 80usize, 30usize, 48_000.0);
    let w = hann(win);
    let top = mel(sr / 2.0);
    let edge_hz: Vec<f64> = (0..n_mels + 2)
        .map(|m| {
            let target = top * m as f64 / (n_mels + 1) as f64;
            // invert mel() by bisection so no closed-form inverse is shared
            let (mut lo, mut hi) = (0.0, sr);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mel(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();

    (0..x.len() / hop)
        .map(|t| {
            let center = t * hop + hop / 2;
            let mut buf = vec![0.0; nfft];
            for j in 0..win {
                let n = center as isize - (win / 2) as isize + j as isize;
                if n >= 0 && (n as usize) < x.len() {
                    buf[j] = w[j] * x[n as usize];
                }
            }
            let mag: Vec<f64> = naive_dft(&buf)
                .into_iter()
                .map(|(re, im)| (re * re + im * im).sqrt())
                .collect();
            let log_mel: Vec<f64> = (0..n_mels)
                .map(|m| {
                    let (l, c, r) = (edge_hz[m], edge_hz[m + 1], edge_hz[m + 2]);
                    let mut e = 0.0;
                    for (k, &v) in mag.iter().enumerate() {
                        let f = k as f64 * sr / nfft as f64;
                        let weight = if f > l && f <= c {
                            (f - l) / (c - l)
                        } else if f > c && f < r {
                            (r - f) / (r - c)
                        } else {
                            0.0
                        };
                        e += weight * v;
                    }
                    if e < 1e-5 {
                        1e-5f64.ln()
                    } else {
                        e.ln()
                    }
                })
                .collect();
            (0..n_cep)
                .map(|k| {
                    let norm = if k == 0 {
                        1.0 / (n_mels as f64).sqrt()
                    } else {
                        (2.0 / n_mels as f64).sqrt()
                    };
                    norm * log_mel
                        .iter()
                        .enumerate()
                        .map(|(m, &v)| v * (PI * k as f64 * (2 * m + 1) as f64 / (2 * n_mels) as f64).cos())
                        .sum::<f64>()
                })
                .collect()
        })
        .collect()
}
