//! Forward pass of the multi-resolution, multi-band spectral discriminator
//! ensemble.
//!
//! Each submodel takes the complex STFT of the waveform as a two-channel
//! (real, imaginary) time × frequency image, keeps the bins of its band, and
//! runs a stack of 2-D convolutions with leaky ReLU in between. The output is
//! a raw score map with the same time × frequency shape as its input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::stft::{stft, StftConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::types::SAMPLE_RATE;

/// One ensemble member: an analysis resolution and a band in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubmodelSpec {
    pub stft: StftConfig,
    pub band_hz: (f64, f64),
}

impl SubmodelSpec {
    /// Half-open bin range `[lo, hi)` covering the band. A band ending at
    /// Nyquist includes the Nyquist bin.
    pub fn bin_range(&self, sample_rate: u32) -> (usize, usize) {
        let n = self.stft.fft_size as f64;
        let sr = f64::from(sample_rate);
        let to_bin = |hz: f64| ((hz * n / sr).ceil() as usize).min(self.stft.bins());
        let lo = to_bin(self.band_hz.0);
        let hi = if self.band_hz.1 >= sr / 2.0 {
            self.stft.bins()
        } else {
            to_bin(self.band_hz.1)
        };
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub submodels: Vec<SubmodelSpec>,
    /// Channel widths from input to output; the first is 2 and the last 1.
    pub channels: Vec<usize>,
    /// (time, frequency) kernel extent per layer, odd in both axes.
    pub kernels: Vec<(usize, usize)>,
    pub leaky_slope: f64,
    pub sample_rate: u32,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        Self::with_channels(vec![2, 32, 64, 64, 64, 1])
    }
}

impl DiscriminatorSpec {
    /// The standard 8-member ensemble and kernels with the given widths.
    pub fn with_channels(channels: Vec<usize>) -> Self {
        let cfg = |w, h| StftConfig {
            window_length: w,
            hop: h,
            fft_size: w,
        };
        let low = (0.0, 8_000.0);
        let mid = (8_000.0, 16_000.0);
        let high = (16_000.0, 24_000.0);
        let submodels = [
            (cfg(1024, 256), low),
            (cfg(2048, 512), low),
            (cfg(4096, 1024), low),
            (cfg(512, 256), mid),
            (cfg(1024, 256), mid),
            (cfg(2048, 512), mid),
            (cfg(512, 256), high),
            (cfg(1024, 512), high),
        ]
        .into_iter()
        .map(|(stft, band_hz)| SubmodelSpec { stft, band_hz })
        .collect();
        Self {
            submodels,
            channels,
            kernels: vec![(3, 3), (3, 3), (3, 3), (3, 3), (1, 3)],
            leaky_slope: 0.1,
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != self.kernels.len() + 1 {
            return Err(Error::Config(format!(
                "{} channel widths for {} layers",
                self.channels.len(),
                self.kernels.len()
            )));
        }
        if self.channels.first() != Some(&2) || self.channels.last() != Some(&1) {
            return Err(Error::Config("discriminator must map 2 channels to 1".into()));
        }
        if self.channels.contains(&0) {
            return Err(Error::Config("zero-width discriminator layer".into()));
        }
        if self.kernels.iter().any(|&(kt, kf)| kt % 2 == 0 || kf % 2 == 0) {
            return Err(Error::Config("discriminator kernels must be odd".into()));
        }
        for s in &self.submodels {
            s.stft.validate()?;
            let (lo, hi) = s.bin_range(self.sample_rate);
            if lo >= hi {
                return Err(Error::Config(format!("empty band {:?}", s.band_hz)));
            }
        }
        Ok(())
    }

    /// (time steps, frequency bins) seen by one output cell.
    pub fn receptive_field(&self) -> (usize, usize) {
        self.kernels
            .iter()
            .fold((1, 1), |(t, f), &(kt, kf)| (t + kt - 1, f + kf - 1))
    }
}

/// 2-D convolution weights in [out][in][time][freq] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kt: usize,
    pub kf: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2dLayer {
    pub fn zeros(in_ch: usize, out_ch: usize, kt: usize, kf: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kt,
            kf,
            weights: vec![0.0; out_ch * in_ch * kt * kf],
            bias: vec![0.0; out_ch],
        }
    }

    fn random(in_ch: usize, out_ch: usize, kt: usize, kf: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (3.0 / (in_ch * kt * kf) as f64).sqrt();
        let mut layer = Self::zeros(in_ch, out_ch, kt, kf);
        layer
            .weights
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..bound));
        layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        layer
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, dt: usize, df: usize) -> f64 {
        self.weights[((o * self.in_ch + i) * self.kt + dt) * self.kf + df]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorWeights {
    pub submodels: Vec<Vec<Conv2dLayer>>,
}

impl DiscriminatorWeights {
    pub fn zeros(spec: &DiscriminatorSpec) -> Self {
        Self::build(spec, Conv2dLayer::zeros)
    }

    /// Deterministic weights; the same seed always gives the same ensemble.
    pub fn random(spec: &DiscriminatorSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(spec, |i, o, kt, kf| Conv2dLayer::random(i, o, kt, kf, &mut rng))
    }

    fn build(spec: &DiscriminatorSpec, mut make: impl FnMut(usize, usize, usize, usize) -> Conv2dLayer) -> Self {
        let submodels = spec
            .submodels
            .iter()
            .map(|_| {
                spec.kernels
                    .iter()
                    .enumerate()
                    .map(|(l, &(kt, kf))| make(spec.channels[l], spec.channels[l + 1], kt, kf))
                    .collect()
            })
            .collect();
        Self { submodels }
    }
}

/// Zero-padded "same" 2-D convolution over channel planes (time × freq).
pub fn conv2d(input: &[Matrix], layer: &Conv2dLayer) -> Result<Vec<Matrix>> {
    if input.len() != layer.in_ch {
        return Err(Error::Shape(format!(
            "conv2d expects {} channels, got {}",
            layer.in_ch,
            input.len()
        )));
    }
    let (rows, cols) = input.first().map_or((0, 0), |m| (m.rows(), m.cols()));
    let (ht, hf) = (layer.kt / 2, layer.kf / 2);
    let mut out: Vec<Matrix> = (0..layer.out_ch)
        .map(|o| {
            let mut m = Matrix::zeros(rows, cols);
            m.as_mut_slice().fill(layer.bias[o]);
            m
        })
        .collect();
    for (o, plane) in out.iter_mut().enumerate() {
        for (i, src) in input.iter().enumerate() {
            for dt in 0..layer.kt {
                for df in 0..layer.kf {
                    let w = layer.weight(o, i, dt, df);
                    if w == 0.0 {
                        continue;
                    }
                    // output (t, f) reads input (t + dt - ht, f + df - hf)
                    let t_lo = ht.saturating_sub(dt);
                    let t_hi = (rows + ht).saturating_sub(dt).min(rows);
                    let f_lo = hf.saturating_sub(df);
                    let f_hi = (cols + hf).saturating_sub(df).min(cols);
                    for t in t_lo..t_hi {
                        let s_row = src.row(t + dt - ht);
                        let d_row = plane.row_mut(t);
                        for f in f_lo..f_hi {
                            d_row[f] += w * s_row[f + df - hf];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Runs one submodel's layer stack on a two-channel spectrogram image.
pub fn score_map(layers: &[Conv2dLayer], leaky_slope: f64, image: Vec<Matrix>) -> Result<Matrix> {
    let mut x = image;
    for (l, layer) in layers.iter().enumerate() {
        x = conv2d(&x, layer)?;
        if l + 1 < layers.len() {
            for plane in &mut x {
                plane.as_mut_slice().iter_mut().for_each(|v| {
                    if *v < 0.0 {
                        *v *= leaky_slope;
                    }
                });
            }
        }
    }
    x.into_iter()
        .next()
        .ok_or_else(|| Error::Shape("discriminator produced no output channel".into()))
}

/// The band-restricted (real, imaginary) image a submodel sees.
pub fn submodel_input(spec: &SubmodelSpec, sample_rate: u32, x: &[f64]) -> Result<Vec<Matrix>> {
    let spectrum = stft(x, spec.stft)?;
    let (lo, hi) = spec.bin_range(sample_rate);
    let mut re = Matrix::zeros(spectrum.len(), hi - lo);
    let mut im = Matrix::zeros(spectrum.len(), hi - lo);
    for (t, frame) in spectrum.iter().enumerate() {
        for (j, c) in frame[lo..hi].iter().enumerate() {
            re.set(t, j, c.re);
            im.set(t, j, c.im);
        }
    }
    Ok(vec![re, im])
}

/// Score maps of every submodel, evaluated in parallel on the current pool.
pub fn discriminator_forward(
    spec: &DiscriminatorSpec,
    weights: &DiscriminatorWeights,
    x: &[f64],
) -> Result<Vec<Matrix>> {
    spec.validate()?;
    if weights.submodels.len() != spec.submodels.len() {
        return Err(Error::Shape(format!(
            "{} weight sets for {} submodels",
            weights.submodels.len(),
            spec.submodels.len()
        )));
    }
    spec.submodels
        .par_iter()
        .zip(weights.submodels.par_iter())
        .map(|(sub, layers)| {
            let image = submodel_input(sub, spec.sample_rate, x)?;
            score_map(layers, spec.leaky_slope, image)
        })
        .collect()
}

/// Mean of each score map.
pub fn mean_scores(maps: &[Matrix]) -> Vec<f64> {
    maps.iter()
        .map(|m| {
            let s = m.as_slice();
            if s.is_empty() {
                0.0
            } else {
                s.iter().sum::<f64>() / s.len() as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ensemble_shape() {
        let spec = DiscriminatorSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.submodels.len(), 8);
        assert_eq!(spec.receptive_field(), (9, 11));
        let per_band: Vec<usize> = [0.0, 8_000.0, 16_000.0]
            .iter()
            .map(|&lo| spec.submodels.iter().filter(|s| s.band_hz.0 == lo).count())
            .collect();
        assert_eq!(per_band, vec![3, 3, 2]);
    }

    #[test]
    fn bands_tile_the_spectrum() {
        let spec = DiscriminatorSpec::default();
        let c = StftConfig::square(512, 256).unwrap();
        let ranges: Vec<(usize, usize)> = [(0.0, 8e3), (8e3, 16e3), (16e3, 24e3)]
            .iter()
            .map(|&band_hz| SubmodelSpec { stft: c, band_hz }.bin_range(spec.sample_rate))
            .collect();
        assert_eq!(ranges[0].0, 0);
        assert_eq!(ranges[0].1, ranges[1].0);
        assert_eq!(ranges[1].1, ranges[2].0);
        assert_eq!(ranges[2].1, 257);
    }

    #[test]
    fn zero_weights_give_zero_scores() {
        let spec = DiscriminatorSpec::with_channels(vec![2, 4, 4, 4, 4, 1]);
        let weights = DiscriminatorWeights::zeros(&spec);
        let x: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.01).sin()).collect();
        let maps = discriminator_forward(&spec, &weights, &x).unwrap();
        assert_eq!(maps.len(), 8);
        assert!(maps.iter().all(|m| m.as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn seeded_weights_are_reproducible() {
        let spec = DiscriminatorSpec::with_channels(vec![2, 3, 3, 3, 3, 1]);
        assert_eq!(
            DiscriminatorWeights::random(&spec, 5),
            DiscriminatorWeights::random(&spec, 5)
        );
        assert_ne!(
            DiscriminatorWeights::random(&spec, 5),
            DiscriminatorWeights::random(&spec, 6)
        );
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(DiscriminatorSpec::with_channels(vec![2, 4, 1]).validate().is_err());
        assert!(DiscriminatorSpec::with_channels(vec![1, 4, 4, 4, 4, 1])
            .validate()
            .is_err());
    }
}
