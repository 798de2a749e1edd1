#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use puffin_core::dsp::{
    extract_features, hann_periodic, l1_loss_configs, magnitude_stft, mfcc, stft, MfccConfig, StftConfig,
};
use puffin_core::linalg::Matrix;
use puffin_core::metrics::{
    discriminator_forward, l1_spectral_loss, l1_spectral_loss_grad, lsgan_ensemble, lsgan_losses, mel_l1_distance,
    mel_l1_loss, score_map, submodel_input, Conv2dLayer, DiscriminatorSpec, DiscriminatorWeights,
};
use puffin_core::types::Waveform;
use puffin_core::Error;
use puffin_testkit::{naive_conv2d, naive_mfcc, naive_stft_magnitude, rng};
use rand::Rng;

fn noise(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn cosine(bin: f64, n_fft: usize, len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| (2.0 * PI * bin * n as f64 / n_fft as f64).cos())
        .collect()
}

fn vowel(len: usize) -> Vec<f64> {
    let formants = [(700.0, 90.0), (1200.0, 110.0), (2600.0, 160.0)];
    (0..len)
        .map(|n| {
            let t = n as f64 / 48_000.0;
            (1..=66)
                .map(|h| {
                    let f = 120.0 * h as f64;
                    let gain: f64 = formants
                        .iter()
                        .map(|&(c, bw)| 1.0 / (1.0 + ((f - c) / bw).powi(2)))
                        .sum();
                    0.2 * gain * (2.0 * PI * f * t).sin()
                })
                .sum()
        })
        .collect()
}

#[test]
fn stft_matches_naive_magnitudes() {
    let mut r = rng(21);
    let x = noise(&mut r, 3000);
    for (w, h, n) in [(256, 64, 256), (200, 50, 256), (512, 128, 1024)] {
        let cfg = StftConfig::new(w, h, n).unwrap();
        let got = magnitude_stft(&x, cfg).unwrap();
        let want = naive_stft_magnitude(&x, w, h, n);
        assert_eq!(got.rows(), want.len());
        for (t, row) in want.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                assert!((got.get(t, k) - v).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn bin_centered_sinusoid_concentrates_in_main_lobe() {
    let cfg = StftConfig::square(1024, 256).unwrap();
    let x = cosine(37.0, 1024, 8192);
    let mag = magnitude_stft(&x, cfg).unwrap();
    for t in 4..mag.rows() - 4 {
        let row = mag.row(t);
        let total: f64 = row.iter().map(|v| v * v).sum();
        let lobe: f64 = row[36..=38].iter().map(|v| v * v).sum();
        assert!(lobe >= 0.9 * total);
        let peak = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(peak, 37);
    }
}

#[test]
fn parseval_holds_per_frame() {
    let mut r = rng(22);
    let x = noise(&mut r, 4096);
    let cfg = StftConfig::square(512, 128).unwrap();
    let frames = stft(&x, cfg).unwrap();
    let w = hann_periodic(512);
    for i in 2..frames.len() - 2 {
        let start = i * 128 - 256;
        let time: f64 = (0..512).map(|j| (w[j] * x[start + j]).powi(2)).sum();
        let spec = &frames[i];
        let last = spec.len() - 1;
        let freq: f64 = spec
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let e = c.norm_sqr();
                if k == 0 || k == last {
                    e
                } else {
                    2.0 * e
                }
            })
            .sum::<f64>()
            / 512.0;
        assert!((time - freq).abs() < 1e-9 * time);
    }
}

#[test]
fn delaying_by_one_hop_shifts_frames() {
    let mut r = rng(23);
    let x = noise(&mut r, 4096);
    let mut y = vec![0.0; 128];
    y.extend_from_slice(&x);
    let cfg = StftConfig::square(512, 128).unwrap();
    let (a, b) = (stft(&x, cfg).unwrap(), stft(&y, cfg).unwrap());
    for i in 2..a.len() - 2 {
        for (u, v) in a[i].iter().zip(&b[i + 1]) {
            assert!((u - v).norm() < 1e-6);
        }
    }
}

#[test]
fn short_signals_are_rejected() {
    let cfg = StftConfig::square(1024, 256).unwrap();
    assert!(matches!(stft(&[0.0; 100], cfg), Err(Error::SignalTooShort { .. })));
}

#[test]
fn mfcc_matches_reference_recipe() {
    let mut r = rng(24);
    for x in [vowel(9600), noise(&mut r, 4800)] {
        let got = mfcc(&x, &MfccConfig::default()).unwrap();
        let want = naive_mfcc(&x);
        assert_eq!(got.rows(), want.len());
        for (t, row) in want.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                assert!((got.get(t, k) - v).abs() < 1e-4, "frame {t} coeff {k}");
            }
        }
    }
}

#[test]
fn mfcc_of_silence_and_noise() {
    let floor = 1e-5f64.ln() * 80f64.sqrt();
    let quiet = mfcc(&[0.0; 4800], &MfccConfig::default()).unwrap();
    assert_eq!(quiet.rows(), 10);
    for t in 0..10 {
        assert!((quiet.get(t, 0) - floor).abs() < 1e-9);
        assert!(quiet.row(t)[1..].iter().all(|v| v.abs() < 1e-9));
    }
    let mut r = rng(25);
    let loud = mfcc(&noise(&mut r, 4800), &MfccConfig::default()).unwrap();
    assert!((0..10).all(|t| loud.get(t, 0) > floor + 10.0));
}

#[test]
fn feature_extraction_checks_track_lengths() {
    let wave = Waveform::new(vowel(4800), 48_000);
    let track = extract_features(&wave, &[120.0; 10], &[1.0; 10]).unwrap();
    assert_eq!(track.len(), 10);
    track.validate().unwrap();
    assert!(extract_features(&wave, &[120.0; 9], &[1.0; 9]).is_err());
    let wrong_rate = Waveform::new(vowel(4800), 16_000);
    assert!(extract_features(&wrong_rate, &[120.0; 10], &[1.0; 10]).is_err());
}

#[test]
fn l1_loss_of_doubled_signal_is_half_mean_magnitude() {
    let x: Vec<f64> = cosine(100.5, 2048, 8192);
    let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let cfgs = l1_loss_configs();
    let want = cfgs
        .iter()
        .map(|c| {
            let mag = naive_stft_magnitude(&x, c.window_length, c.hop, c.fft_size);
            let n: usize = mag.iter().map(Vec::len).sum();
            0.5 * mag.iter().flatten().sum::<f64>() / n as f64
        })
        .sum::<f64>()
        / cfgs.len() as f64;
    let got = l1_spectral_loss(&x, &doubled, &cfgs).unwrap();
    assert!((got - want).abs() < 1e-5 * want);
    assert_eq!(l1_spectral_loss(&x, &x, &cfgs).unwrap(), 0.0);
}

#[test]
fn l1_gradient_matches_finite_differences() {
    let mut r = rng(26);
    let a = noise(&mut r, 256);
    let b = noise(&mut r, 256);
    let cfgs = [
        StftConfig::square(64, 16).unwrap(),
        StftConfig::square(128, 32).unwrap(),
    ];
    let (loss, grad) = l1_spectral_loss_grad(&a, &b, &cfgs).unwrap();
    assert!((loss - l1_spectral_loss(&a, &b, &cfgs).unwrap()).abs() < 1e-12);
    let eps = 1e-6;
    let mut err = 0.0;
    let mut norm = 0.0;
    for n in 0..a.len() {
        let mut hi = a.clone();
        hi[n] += eps;
        let mut lo = a.clone();
        lo[n] -= eps;
        let fd = (l1_spectral_loss(&hi, &b, &cfgs).unwrap() - l1_spectral_loss(&lo, &b, &cfgs).unwrap()) / (2.0 * eps);
        err += (fd - grad[n]).powi(2);
        norm += fd * fd;
    }
    assert!((err / norm).sqrt() < 1e-4);
}

#[test]
fn log_mel_distance_by_hand() {
    let a = Matrix::from_vec(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let b = Matrix::from_vec(2, 2, vec![1.0, 1.0, 0.0, 5.0]).unwrap();
    assert!((mel_l1_distance(&a, &b).unwrap() - 1.25).abs() < 1e-15);
    let mut r = rng(27);
    let x = noise(&mut r, 4096);
    assert_eq!(mel_l1_loss(&x, &x).unwrap(), 0.0);
    let y: Vec<f64> = x.iter().map(|v| v * std::f64::consts::E).collect();
    // scaling by e shifts every unfloored log-mel value by exactly 1
    assert!((mel_l1_loss(&x, &y).unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn lsgan_objectives_by_direct_arithmetic() {
    let mut r = rng(28);
    let real: Vec<Matrix> = (0..3)
        .map(|_| Matrix::from_vec(4, 5, noise(&mut r, 20)).unwrap())
        .collect();
    let fake: Vec<Matrix> = (0..3)
        .map(|_| Matrix::from_vec(4, 5, noise(&mut r, 20)).unwrap())
        .collect();
    let (mut d, mut g) = (0.0, 0.0);
    for (rm, fm) in real.iter().zip(&fake) {
        let (rs, fs) = (rm.as_slice(), fm.as_slice());
        d +=
            rs.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / 20.0 + fs.iter().map(|v| v * v).sum::<f64>() / 20.0;
        g += fs.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / 20.0;
        let (d1, g1) = lsgan_losses(rm, fm).unwrap();
        assert!(d1 >= 0.0 && g1 >= 0.0);
    }
    let (de, ge) = lsgan_ensemble(&real, &fake).unwrap();
    assert!((de - d).abs() < 1e-12 && (ge - g).abs() < 1e-12);
    let ones = Matrix::from_vec(2, 2, vec![1.0; 4]).unwrap();
    let zeros = Matrix::zeros(2, 2);
    assert_eq!(lsgan_losses(&ones, &zeros).unwrap().0, 0.0);
}

fn random_conv(r: &mut impl Rng, i: usize, o: usize, kt: usize, kf: usize) -> Conv2dLayer {
    let mut layer = Conv2dLayer::zeros(i, o, kt, kf);
    layer.weights.iter_mut().for_each(|w| *w = r.random_range(-0.5..0.5));
    layer.bias.iter_mut().for_each(|b| *b = r.random_range(-0.1..0.1));
    layer
}

fn nested(layer: &Conv2dLayer) -> Vec<Vec<Vec<Vec<f64>>>> {
    (0..layer.out_ch)
        .map(|o| {
            (0..layer.in_ch)
                .map(|i| {
                    (0..layer.kt)
                        .map(|dt| (0..layer.kf).map(|df| layer.weight(o, i, dt, df)).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn to_planes(image: &[Matrix]) -> Vec<Vec<Vec<f64>>> {
    image
        .iter()
        .map(|m| (0..m.rows()).map(|t| m.row(t).to_vec()).collect())
        .collect()
}

fn small_stack(r: &mut impl Rng) -> Vec<Conv2dLayer> {
    let spec = DiscriminatorSpec::default();
    let widths = [2, 3, 4, 4, 3, 1];
    spec.kernels
        .iter()
        .enumerate()
        .map(|(l, &(kt, kf))| random_conv(r, widths[l], widths[l + 1], kt, kf))
        .collect()
}

#[test]
fn score_map_matches_naive_stack() {
    let mut r = rng(29);
    let layers = small_stack(&mut r);
    let image: Vec<Matrix> = (0..2)
        .map(|_| Matrix::from_vec(12, 17, noise(&mut r, 12 * 17)).unwrap())
        .collect();
    let got = score_map(&layers, 0.1, image.clone()).unwrap();
    let mut x = to_planes(&image);
    for (l, layer) in layers.iter().enumerate() {
        x = naive_conv2d(&x, &nested(layer), &layer.bias);
        if l + 1 < layers.len() {
            x.iter_mut().flatten().flatten().for_each(|v| {
                if *v < 0.0 {
                    *v *= 0.1
                }
            });
        }
    }
    for t in 0..12 {
        for f in 0..17 {
            assert!((got.get(t, f) - x[0][t][f]).abs() < 1e-10);
        }
    }
}

#[test]
fn receptive_field_probe() {
    let spec = DiscriminatorSpec::default();
    assert_eq!(spec.receptive_field(), (9, 11));
    let mut r = rng(30);
    let layers = small_stack(&mut r);
    let image: Vec<Matrix> = (0..2)
        .map(|_| Matrix::from_vec(30, 40, noise(&mut r, 1200)).unwrap())
        .collect();
    let base = score_map(&layers, 0.1, image.clone()).unwrap();
    let mut bumped = image;
    let old = bumped[0].get(15, 20);
    bumped[0].set(15, 20, old + 1.0);
    let out = score_map(&layers, 0.1, bumped).unwrap();
    let (mut t_range, mut f_range) = ((usize::MAX, 0), (usize::MAX, 0));
    for t in 0..30 {
        for f in 0..40 {
            if (out.get(t, f) - base.get(t, f)).abs() > 0.0 {
                t_range = (t_range.0.min(t), t_range.1.max(t));
                f_range = (f_range.0.min(f), f_range.1.max(f));
            }
        }
    }
    assert_eq!(t_range, (11, 19));
    assert_eq!(f_range, (15, 25));
}

#[test]
fn submodel_bands_and_images() {
    let spec = DiscriminatorSpec::default();
    assert_eq!(spec.submodels.len(), 8);
    assert_eq!(spec.submodels[0].bin_range(48_000), (0, 171));
    let top = spec.submodels.last().unwrap();
    assert_eq!(top.bin_range(48_000), (top.stft.fft_size.div_ceil(3), top.stft.bins()));

    let mut r = rng(31);
    let x = noise(&mut r, 2048);
    let sub = &spec.submodels[3];
    let (lo, hi) = sub.bin_range(48_000);
    let image = submodel_input(sub, 48_000, &x).unwrap();
    let naive = naive_stft_magnitude(&x, sub.stft.window_length, sub.stft.hop, sub.stft.fft_size);
    assert_eq!(image[0].cols(), hi - lo);
    for (t, row) in naive.iter().enumerate() {
        for k in lo..hi {
            let (re, im) = (image[0].get(t, k - lo), image[1].get(t, k - lo));
            assert!(((re * re + im * im).sqrt() - row[k]).abs() < 1e-8);
        }
    }
}

#[test]
fn forward_is_deterministic_and_shaped() {
    let spec = DiscriminatorSpec::with_channels(vec![2, 4, 4, 4, 4, 1]);
    let weights = DiscriminatorWeights::random(&spec, 9);
    assert_eq!(weights, DiscriminatorWeights::random(&spec, 9));
    let mut r = rng(32);
    let x = noise(&mut r, 4800);
    let maps = discriminator_forward(&spec, &weights, &x).unwrap();
    assert_eq!(maps, discriminator_forward(&spec, &weights, &x).unwrap());
    for (m, sub) in maps.iter().zip(&spec.submodels) {
        let (lo, hi) = sub.bin_range(48_000);
        assert_eq!((m.rows(), m.cols()), (sub.stft.n_frames(4800), hi - lo));
    }
    let zero = discriminator_forward(&spec, &DiscriminatorWeights::zeros(&spec), &x).unwrap();
    assert!(zero.iter().all(|m| m.as_slice().iter().all(|&v| v == 0.0)));
}
