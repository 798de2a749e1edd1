//! Same-length 1-D convolution over rows of activations.
//!
//! `conv_step` computes one output row from its k input taps and is the only
//! code path for convolution; the batch and streaming generators both go
//! through it, which keeps their outputs bit-identical.

use crate::error::{Error, Result};
use crate::generator::model::ConvLayer;
use crate::generator::OpCount;
use crate::linalg::Matrix;

/// Four-lane dot product; the lane split is fixed so results are
/// reproducible across call sites.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn leaky_relu(x: &mut [f64], slope: f64) {
    for v in x {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

/// One output row from `taps[j]`, the input row at offset `j - k/2`
/// (all-zero rows stand in for padding).
pub fn conv_step(layer: &ConvLayer, taps: &[&[f64]], out: &mut [f64], ops: &mut OpCount) {
    debug_assert_eq!(taps.len(), layer.kernel());
    debug_assert_eq!(out.len(), layer.out_ch());
    for (o, y) in out.iter_mut().enumerate() {
        let mut acc = layer.bias()[o];
        for (j, x) in taps.iter().enumerate() {
            acc += dot(layer.tap(o, j), x);
        }
        *y = acc;
    }
    ops.conv_macs += (layer.in_ch() * layer.out_ch() * layer.kernel()) as u64;
}

/// Zero-padded convolution of a T×C_in matrix, followed by leaky ReLU when
/// `slope` is given.
pub fn conv1d(x: &Matrix, layer: &ConvLayer, slope: Option<f64>, ops: &mut OpCount) -> Result<Matrix> {
    if x.cols() != layer.in_ch() {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            layer.in_ch(),
            x.cols()
        )));
    }
    let k = layer.kernel();
    let half = k / 2;
    let zeros = vec![0.0; layer.in_ch()];
    let mut out = Matrix::zeros(x.rows(), layer.out_ch());
    let mut taps: Vec<&[f64]> = Vec::with_capacity(k);
    for t in 0..x.rows() {
        taps.clear();
        for j in 0..k {
            let src = (t + j).checked_sub(half).filter(|&s| s < x.rows());
            taps.push(src.map_or(zeros.as_slice(), |s| x.row(s)));
        }
        let row = out.row_mut(t);
        conv_step(layer, &taps, row, ops);
        if let Some(s) = slope {
            leaky_relu(row, s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_passes_input() {
        let c = 3;
        let mut w = vec![0.0; c * c * 3];
        for i in 0..c {
            w[(i * c + i) * 3 + 1] = 1.0;
        }
        let layer = ConvLayer::new(c, c, 3, &w, vec![0.0; c]).unwrap();
        let x = Matrix::from_vec(4, c, (0..12).map(|v| v as f64 - 5.0).collect()).unwrap();
        let y = conv1d(&x, &layer, None, &mut OpCount::default()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_input_gives_activated_bias() {
        let layer = ConvLayer::new(2, 3, 3, &[0.5; 18], vec![1.0, -2.0, 0.0]).unwrap();
        let y = conv1d(&Matrix::zeros(5, 2), &layer, Some(0.1), &mut OpCount::default()).unwrap();
        for row in y.iter_rows() {
            assert_eq!(row, &[1.0, -0.2, 0.0]);
        }
    }

    #[test]
    fn counts_every_tap() {
        let layer = ConvLayer::zeros(4, 5, 3);
        let mut ops = OpCount::default();
        conv1d(&Matrix::zeros(7, 4), &layer, None, &mut ops).unwrap();
        assert_eq!(ops.conv_macs, 7 * 4 * 5 * 3);
    }

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (0..7).map(f64::from).collect();
        assert_eq!(dot(&a, &a), 91.0);
    }

    #[test]
    fn channel_mismatch() {
        let layer = ConvLayer::zeros(4, 5, 3);
        assert!(conv1d(&Matrix::zeros(2, 3), &layer, None, &mut OpCount::default()).is_err());
    }
}
