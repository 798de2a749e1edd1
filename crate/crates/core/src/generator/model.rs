//! Generator weights, architecture hyperparameters and the `PUFN` model file.
//!
//! Layout (all little-endian): magic `PUFN`, u32 version, u32 H, u32 F,
//! u32 C_out, f32 leaky slope, 32 f32 input scales, six layer records
//! `(u32 in, u32 out, u32 k, f32 weights[out][in][k], f32 bias[out])` for
//! the four frame-rate convs, the pulse-rate conv and the projection, then a
//! u8 mask flag optionally followed by a bitmap of 16×16 projection blocks
//! (row-major over `[out][in]`, LSB first within each byte).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::project::{BlockMask, Projection};
use crate::types::{F0_INDEX, FEATURE_DIM, VOICING_INDEX};

pub const MODEL_MAGIC: &[u8; 4] = b"PUFN";
pub const MODEL_VERSION: u32 = 1;
pub const FFT_LEN: usize = 2048;
pub const KERNEL: usize = 3;
pub const FRAME_LAYERS: usize = 4;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.1;
/// Fraction of projection blocks kept in the sparse configuration.
pub const SPARSE_DENSITY: f64 = 0.1;

/// Default per-feature input scaling: MFCCs, F0, voicing.
pub fn default_input_scale() -> [f64; FEATURE_DIM] {
    let mut s = [as_stored(0.05); FEATURE_DIM];
    s[F0_INDEX] = as_stored(0.005);
    s[VOICING_INDEX] = 1.0;
    s
}

/// Rounds a parameter to the f32 precision it has in a model file.
fn as_stored(v: f64) -> f64 {
    f64::from(v as f32)
}

/// A 1-D convolution with bias. Weights are kept as `[out][k][in]` so the
/// inner loop over input channels is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvLayer {
    /// Weights in file order, `[out][in][k]`.
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, weights_oik: &[f64], bias: Vec<f64>) -> Result<Self> {
        if weights_oik.len() != in_ch * out_ch * kernel || bias.len() != out_ch {
            return Err(Error::Shape(format!(
                "conv ({in_ch}, {out_ch}, {kernel}) needs {} weights and {out_ch} biases, got {} and {}",
                in_ch * out_ch * kernel,
                weights_oik.len(),
                bias.len()
            )));
        }
        if kernel.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel width {kernel} is not odd")));
        }
        let mut weights = vec![0.0; weights_oik.len()];
        for o in 0..out_ch {
            for i in 0..in_ch {
                for j in 0..kernel {
                    weights[(o * kernel + j) * in_ch + i] = weights_oik[(o * in_ch + i) * kernel + j];
                }
            }
        }
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            weights,
            bias,
        })
    }

    pub fn zeros(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel,
            weights: vec![0.0; in_ch * out_ch * kernel],
            bias: vec![0.0; out_ch],
        }
    }

    pub fn in_ch(&self) -> usize {
        self.in_ch
    }

    pub fn out_ch(&self) -> usize {
        self.out_ch
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    /// Weight for output `o`, input `i`, tap `j`.
    pub fn weight(&self, o: usize, i: usize, j: usize) -> f64 {
        self.weights[(o * self.kernel + j) * self.in_ch + i]
    }

    pub fn set_weight(&mut self, o: usize, i: usize, j: usize, v: f64) {
        self.weights[(o * self.kernel + j) * self.in_ch + i] = v;
    }

    /// Contiguous weights of output `o` at tap `j`, over input channels.
    #[inline]
    pub(crate) fn tap(&self, o: usize, j: usize) -> &[f64] {
        let start = (o * self.kernel + j) * self.in_ch;
        &self.weights[start..start + self.in_ch]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weights_oik(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.weights.len());
        for o in 0..self.out_ch {
            for i in 0..self.in_ch {
                for j in 0..self.kernel {
                    w.push(self.weight(o, i, j));
                }
            }
        }
        w
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    fn random(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Self {
        // unit-variance outputs for unit-variance inputs
        let bound = (3.0 / (in_ch * kernel) as f64).sqrt();
        let weights = (0..in_ch * out_ch * kernel)
            .map(|_| as_stored(rng.random_range(-bound..bound)))
            .collect();
        let bias = (0..out_ch).map(|_| as_stored(rng.random_range(-0.1..0.1))).collect();
        Self {
            in_ch,
            out_ch,
            kernel,
            weights,
            bias,
        }
    }
}

/// Architecture hyperparameters; weights are drawn or loaded separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub hidden: usize,
    pub fft_len: usize,
    pub sparse: bool,
    pub leaky_slope: f64,
}

impl ModelConfig {
    /// Standard configuration: H = 256 with a 10% block-sparse projection.
    pub fn standard() -> Self {
        Self {
            hidden: 256,
            fft_len: FFT_LEN,
            sparse: true,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    /// Large configuration: H = 1024, dense.
    pub fn large() -> Self {
        Self {
            hidden: 1024,
            fft_len: FFT_LEN,
            sparse: false,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "p" => Ok(Self::standard()),
            "pl" => Ok(Self::large()),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.fft_len + 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    hidden: usize,
    fft_len: usize,
    leaky_slope: f64,
    input_scale: [f64; FEATURE_DIM],
    frame_layers: Vec<ConvLayer>,
    pulse_layer: ConvLayer,
    projection: Projection,
}

impl GeneratorModel {
    pub fn from_parts(
        fft_len: usize,
        leaky_slope: f64,
        input_scale: [f64; FEATURE_DIM],
        frame_layers: Vec<ConvLayer>,
        pulse_layer: ConvLayer,
        projection: Projection,
    ) -> Result<Self> {
        let hidden = pulse_layer.out_ch();
        let model = Self {
            hidden,
            fft_len,
            leaky_slope,
            input_scale,
            frame_layers,
            pulse_layer,
            projection,
        };
        model.validate()?;
        Ok(model)
    }

    /// All-zero weights: synthesizes silence.
    pub fn zeros(config: ModelConfig) -> Self {
        let h = config.hidden;
        let c = config.out_channels();
        let mut frame_layers = vec![ConvLayer::zeros(FEATURE_DIM, h, KERNEL)];
        frame_layers.extend((1..FRAME_LAYERS).map(|_| ConvLayer::zeros(h, h, KERNEL)));
        Self {
            hidden: h,
            fft_len: config.fft_len,
            leaky_slope: as_stored(config.leaky_slope),
            input_scale: default_input_scale(),
            frame_layers,
            pulse_layer: ConvLayer::zeros(h, h, KERNEL),
            projection: Projection::new(ConvLayer::zeros(h, c, 1), None).expect("consistent shapes"),
        }
    }

    /// Deterministic random weights for a configuration. Sparse configurations
    /// get a random block mask keeping 10% of the blocks.
    pub fn random(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.hidden;
        let c = config.out_channels();
        let mut frame_layers = vec![ConvLayer::random(FEATURE_DIM, h, KERNEL, &mut rng)];
        frame_layers.extend((1..FRAME_LAYERS).map(|_| ConvLayer::random(h, h, KERNEL, &mut rng)));
        let pulse_layer = ConvLayer::random(h, h, KERNEL, &mut rng);
        let proj = ConvLayer::random(h, c, 1, &mut rng);
        let mask = config.sparse.then(|| BlockMask::random(c, h, SPARSE_DENSITY, &mut rng));
        Self {
            hidden: h,
            fft_len: config.fft_len,
            leaky_slope: as_stored(config.leaky_slope),
            input_scale: default_input_scale(),
            frame_layers,
            pulse_layer,
            projection: Projection::new(proj, mask).expect("consistent shapes"),
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn out_channels(&self) -> usize {
        self.projection.out_ch()
    }

    /// Spectrum bins per pulse, `C_out / 2`.
    pub fn bins(&self) -> usize {
        self.out_channels() / 2
    }

    pub fn leaky_slope(&self) -> f64 {
        self.leaky_slope
    }

    pub fn input_scale(&self) -> &[f64; FEATURE_DIM] {
        &self.input_scale
    }

    pub fn frame_layers(&self) -> &[ConvLayer] {
        &self.frame_layers
    }

    pub fn pulse_layer(&self) -> &ConvLayer {
        &self.pulse_layer
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn projection_mut(&mut self) -> &mut Projection {
        &mut self.projection
    }

    pub fn frame_layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.frame_layers
    }

    pub fn pulse_layer_mut(&mut self) -> &mut ConvLayer {
        &mut self.pulse_layer
    }

    pub fn set_input_scale(&mut self, scale: [f64; FEATURE_DIM]) {
        self.input_scale = scale;
    }

    /// Checks shapes, finiteness, the Hermitian spectrum width and, when a
    /// mask is present, its 10% block density.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelFormat(m));
        let h = self.hidden;
        if h == 0 {
            return bad("hidden width is zero".into());
        }
        if self.fft_len < 2 || !self.fft_len.is_power_of_two() {
            return bad(format!("FFT length {} is not a power of two", self.fft_len));
        }
        let c = self.out_channels();
        if !c.is_multiple_of(2) || c / 2 != self.fft_len / 2 + 1 {
            return bad(format!(
                "projection width {c} does not hold a {}-bin Hermitian spectrum",
                self.fft_len / 2 + 1
            ));
        }
        if self.frame_layers.len() != FRAME_LAYERS {
            return bad(format!(
                "expected {FRAME_LAYERS} frame-rate layers, got {}",
                self.frame_layers.len()
            ));
        }
        let expect = |l: &ConvLayer, i: usize, o: usize, k: usize, name: &str| {
            if (l.in_ch(), l.out_ch(), l.kernel()) != (i, o, k) {
                Err(Error::ModelFormat(format!(
                    "{name} is ({}, {}, {}), expected ({i}, {o}, {k})",
                    l.in_ch(),
                    l.out_ch(),
                    l.kernel()
                )))
            } else {
                Ok(())
            }
        };
        expect(&self.frame_layers[0], FEATURE_DIM, h, KERNEL, "frame layer 0")?;
        for (n, l) in self.frame_layers.iter().enumerate().skip(1) {
            expect(l, h, h, KERNEL, &format!("frame layer {n}"))?;
        }
        expect(&self.pulse_layer, h, h, KERNEL, "pulse layer")?;
        expect(self.projection.layer(), h, c, 1, "projection")?;
        let finite = self.frame_layers.iter().all(ConvLayer::is_finite)
            && self.pulse_layer.is_finite()
            && self.projection.layer().is_finite()
            && self.leaky_slope.is_finite()
            && self.input_scale.iter().all(|v| v.is_finite());
        if !finite {
            return bad("non-finite parameter".into());
        }
        if let Some(mask) = self.projection.mask() {
            let total = mask.n_blocks();
            let expected = (SPARSE_DENSITY * total as f64).round() as usize;
            if mask.count() != expected {
                return bad(format!(
                    "block mask keeps {} of {total} blocks, expected {expected} (10%)",
                    mask.count()
                ));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        put_u32(&mut buf, MODEL_VERSION);
        put_u32(&mut buf, self.hidden as u32);
        put_u32(&mut buf, self.fft_len as u32);
        put_u32(&mut buf, self.out_channels() as u32);
        put_f32(&mut buf, self.leaky_slope);
        for &s in &self.input_scale {
            put_f32(&mut buf, s);
        }
        let layers = self
            .frame_layers
            .iter()
            .chain([&self.pulse_layer, self.projection.layer()]);
        for l in layers {
            put_u32(&mut buf, l.in_ch() as u32);
            put_u32(&mut buf, l.out_ch() as u32);
            put_u32(&mut buf, l.kernel() as u32);
            for w in l.weights_oik() {
                put_f32(&mut buf, w);
            }
            for &b in l.bias() {
                put_f32(&mut buf, b);
            }
        }
        match self.projection.mask() {
            None => buf.push(0),
            Some(mask) => {
                buf.push(1);
                buf.extend_from_slice(&mask.to_bitmap());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let hidden = r.u32()? as usize;
        let fft_len = r.u32()? as usize;
        let out_ch = r.u32()? as usize;
        let leaky_slope = r.f32()?;
        let mut input_scale = [0.0; FEATURE_DIM];
        for s in input_scale.iter_mut() {
            *s = r.f32()?;
        }
        let mut layers = Vec::with_capacity(FRAME_LAYERS + 2);
        for _ in 0..FRAME_LAYERS + 2 {
            let (i, o, k) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
            let n = i
                .checked_mul(o)
                .and_then(|v| v.checked_mul(k))
                .filter(|&n| n <= r.remaining() / 4)
                .ok_or_else(|| Error::ModelFormat(format!("layer ({i}, {o}, {k}) exceeds file size")))?;
            let w = r.f32s(n)?;
            let b = r.f32s(o)?;
            layers.push(ConvLayer::new(i, o, k, &w, b).map_err(|e| Error::ModelFormat(e.to_string()))?);
        }
        let proj = layers.pop().expect("six layers");
        let pulse = layers.pop().expect("six layers");
        if proj.out_ch() != out_ch || pulse.out_ch() != hidden {
            return Err(Error::ModelFormat(format!(
                "header (H={hidden}, C_out={out_ch}) disagrees with layer shapes"
            )));
        }
        let mask = match r.take(1)?[0] {
            0 => None,
            1 => {
                let (rows, cols) = BlockMask::grid(proj.out_ch(), proj.in_ch());
                let bitmap = r.take((rows * cols).div_ceil(8))?;
                Some(BlockMask::from_bitmap(rows, cols, bitmap))
            }
            f => return Err(Error::ModelFormat(format!("bad mask flag {f}"))),
        };
        if r.remaining() != 0 {
            return Err(Error::ModelFormat(format!("{} trailing bytes", r.remaining())));
        }
        let projection = Projection::new(proj, mask).map_err(|e| Error::ModelFormat(e.to_string()))?;
        Self::from_parts(fft_len, leaky_slope, input_scale, layers, pulse, projection)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Scales one raw feature frame into `out`.
    pub fn scale_frame(&self, frame: &[f32], out: &mut [f64]) -> Result<()> {
        for ((o, &v), &s) in out.iter_mut().zip(frame).zip(&self.input_scale) {
            *o = f64::from(v) * s;
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("scaled features are not finite".into()));
        }
        Ok(())
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&(v as f32).to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::ModelFormat(format!(
                "truncated: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f64::from(f32::from_le_bytes(self.take(4)?.try_into().unwrap())))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig {
            hidden: 16,
            fft_len: FFT_LEN,
            sparse: true,
            leaky_slope: 0.1,
        }
    }

    #[test]
    fn file_round_trip() {
        let model = GeneratorModel::random(small(), 3);
        let back = GeneratorModel::from_bytes(&model.to_bytes()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn truncated_file_is_a_model_error() {
        let bytes = GeneratorModel::random(small(), 1).to_bytes();
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                GeneratorModel::from_bytes(&bytes[..cut]),
                Err(Error::ModelFormat(_))
            ));
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(GeneratorModel::from_bytes(&extra).is_err());
    }

    #[test]
    fn mask_density_is_enforced() {
        let mut model = GeneratorModel::random(small(), 2);
        let (rows, cols) = BlockMask::grid(model.out_channels(), model.hidden());
        let all = BlockMask::from_bits(rows, cols, vec![true; rows * cols]).unwrap();
        model.projection_mut().set_mask(Some(all)).unwrap();
        assert!(matches!(model.validate(), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn presets() {
        assert_eq!(ModelConfig::preset("p").unwrap().hidden, 256);
        assert_eq!(ModelConfig::preset("PL").unwrap().hidden, 1024);
        assert!(ModelConfig::preset("x").is_err());
        assert_eq!(ModelConfig::standard().out_channels(), 2050);
    }

    #[test]
    fn random_sparse_mask_keeps_ten_percent() {
        let model = GeneratorModel::random(ModelConfig::standard(), 9);
        let mask = model.projection().mask().unwrap();
        assert_eq!(mask.n_blocks(), 129 * 16);
        assert_eq!(mask.count(), 206);
        model.validate().unwrap();
    }
}
