//! Width-1 output projection with optional 16×16 block sparsity.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::conv::dot;
use crate::generator::model::ConvLayer;
use crate::generator::OpCount;
use crate::linalg::Matrix;

pub const BLOCK: usize = 16;

/// Which 16×16 blocks of the `[out][in]` weight matrix are kept. Edge blocks
/// of a dimension that is not a multiple of 16 are partial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BlockMask {
    /// Block grid `(rows, cols)` for a weight of `out_ch` × `in_ch`.
    pub fn grid(out_ch: usize, in_ch: usize) -> (usize, usize) {
        (out_ch.div_ceil(BLOCK), in_ch.div_ceil(BLOCK))
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} mask bits for a {rows}x{cols} block grid",
                bits.len()
            )));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn full(out_ch: usize, in_ch: usize) -> Self {
        let (rows, cols) = Self::grid(out_ch, in_ch);
        Self {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn empty(out_ch: usize, in_ch: usize) -> Self {
        let (rows, cols) = Self::grid(out_ch, in_ch);
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    /// Keeps `round(density * n_blocks)` blocks chosen uniformly.
    pub fn random(out_ch: usize, in_ch: usize, density: f64, rng: &mut ChaCha8Rng) -> Self {
        let (rows, cols) = Self::grid(out_ch, in_ch);
        let n = rows * cols;
        let keep = (density * n as f64).round() as usize;
        let mut bits = vec![false; n];
        for i in sample(rng, n, keep.min(n)) {
            bits[i] = true;
        }
        Self { rows, cols, bits }
    }

    /// Unpacks an LSB-first bitmap.
    pub fn from_bitmap(rows: usize, cols: usize, bitmap: &[u8]) -> Self {
        let bits = (0..rows * cols).map(|i| bitmap[i / 8] >> (i % 8) & 1 == 1).collect();
        Self { rows, cols, bits }
    }

    pub fn to_bitmap(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            out[i / 8] |= 1 << (i % 8);
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, block_row: usize, block_col: usize) -> bool {
        self.bits[block_row * self.cols + block_col]
    }

    pub fn n_blocks(&self) -> usize {
        self.bits.len()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn density(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.bits.len() as f64
        }
    }
}

/// A kept block, copied out of the weight matrix row by row.
#[derive(Debug, Clone, PartialEq)]
struct Block {
    out_start: usize,
    in_start: usize,
    n_out: usize,
    n_in: usize,
    weights: Vec<f64>,
}

/// The final pulse-rate layer: a 1-D convolution of width 1 mapping H hidden
/// channels to the real and imaginary halves of a spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    layer: ConvLayer,
    mask: Option<BlockMask>,
    blocks: Vec<Block>,
}

impl Projection {
    pub fn new(layer: ConvLayer, mask: Option<BlockMask>) -> Result<Self> {
        if layer.kernel() != 1 {
            return Err(Error::Shape(format!(
                "projection kernel width must be 1, got {}",
                layer.kernel()
            )));
        }
        let mut p = Self {
            layer,
            mask: None,
            blocks: Vec::new(),
        };
        p.set_mask(mask)?;
        Ok(p)
    }

    /// Replaces the mask and rebuilds the packed blocks.
    pub fn set_mask(&mut self, mask: Option<BlockMask>) -> Result<()> {
        let (out_ch, in_ch) = (self.layer.out_ch(), self.layer.in_ch());
        if let Some(m) = &mask {
            if (m.rows(), m.cols()) != BlockMask::grid(out_ch, in_ch) {
                return Err(Error::Shape(format!(
                    "{}x{} block mask does not tile a {out_ch}x{in_ch} weight",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        self.blocks = match &mask {
            None => Vec::new(),
            Some(m) => {
                let mut blocks = Vec::with_capacity(m.count());
                for br in 0..m.rows() {
                    for bc in 0..m.cols() {
                        if !m.get(br, bc) {
                            continue;
                        }
                        let out_start = br * BLOCK;
                        let in_start = bc * BLOCK;
                        let n_out = BLOCK.min(out_ch - out_start);
                        let n_in = BLOCK.min(in_ch - in_start);
                        let mut weights = Vec::with_capacity(n_out * n_in);
                        for o in out_start..out_start + n_out {
                            weights.extend_from_slice(&self.layer.tap(o, 0)[in_start..in_start + n_in]);
                        }
                        blocks.push(Block {
                            out_start,
                            in_start,
                            n_out,
                            n_in,
                            weights,
                        });
                    }
                }
                blocks
            }
        };
        self.mask = mask;
        Ok(())
    }

    pub fn layer(&self) -> &ConvLayer {
        &self.layer
    }

    /// Mutable access to the raw weights; the mask is re-applied afterwards.
    pub fn update_layer(&mut self, f: impl FnOnce(&mut ConvLayer)) {
        f(&mut self.layer);
        let mask = self.mask.take();
        self.set_mask(mask).expect("mask shape unchanged");
    }

    pub fn mask(&self) -> Option<&BlockMask> {
        self.mask.as_ref()
    }

    pub fn in_ch(&self) -> usize {
        self.layer.in_ch()
    }

    pub fn out_ch(&self) -> usize {
        self.layer.out_ch()
    }

    /// Multiply-adds per input row.
    pub fn macs_per_row(&self) -> usize {
        match &self.mask {
            None => self.in_ch() * self.out_ch(),
            Some(_) => self.blocks.iter().map(|b| b.n_out * b.n_in).sum(),
        }
    }

    /// Weight with the mask applied.
    pub fn effective_weight(&self, o: usize, i: usize) -> f64 {
        match &self.mask {
            Some(m) if !m.get(o / BLOCK, i / BLOCK) => 0.0,
            _ => self.layer.weight(o, i, 0),
        }
    }

    /// Projects one input row. Only kept blocks are visited.
    pub fn apply_row(&self, x: &[f64], out: &mut [f64], ops: &mut OpCount) {
        debug_assert_eq!(x.len(), self.in_ch());
        debug_assert_eq!(out.len(), self.out_ch());
        out.copy_from_slice(self.layer.bias());
        match &self.mask {
            None => {
                for (o, y) in out.iter_mut().enumerate() {
                    *y += dot(self.layer.tap(o, 0), x);
                }
            }
            Some(_) => {
                for b in &self.blocks {
                    let xs = &x[b.in_start..b.in_start + b.n_in];
                    for (r, w) in b.weights.chunks_exact(b.n_in).enumerate() {
                        out[b.out_start + r] += dot(w, xs);
                    }
                }
            }
        }
        ops.proj_macs += self.macs_per_row() as u64;
    }
}

/// P×H pulse-rate activations to P×C_out.
pub fn project_sparse(x: &Matrix, proj: &Projection, ops: &mut OpCount) -> Result<Matrix> {
    if x.cols() != proj.in_ch() {
        return Err(Error::Shape(format!(
            "projection expects {} input channels, got {}",
            proj.in_ch(),
            x.cols()
        )));
    }
    let mut out = Matrix::zeros(x.rows(), proj.out_ch());
    for p in 0..x.rows() {
        proj.apply_row(x.row(p), out.row_mut(p), ops);
    }
    Ok(out)
}
