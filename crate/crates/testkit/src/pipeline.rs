//! The whole generator forward pass written out in one function.

use puffin_core::generator::{ConvLayer, GeneratorModel};
use puffin_core::types::FeatureTrack;

use crate::dense::{ola_window, oracle_neighbours};
use crate::naive::{naive_conv1d, naive_idft, scalar_interp};

fn layer_weights(layer: &ConvLayer) -> Vec<Vec<Vec<f64>>> {
    (0..layer.out_ch())
        .map(|o| {
            (0..layer.in_ch())
                .map(|i| (0..layer.kernel()).map(|j| layer.weight(o, i, j)).collect())
                .collect()
        })
        .collect()
}

fn leaky(rows: &mut [Vec<f64>], slope: f64) {
    for v in rows.iter_mut().flatten() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

/// Synthesizes `features` with `model`, given the pulse positions to use.
/// Output length is `T * S`.
pub fn reference_synthesize(model: &GeneratorModel, features: &FeatureTrack, positions: &[usize]) -> Vec<f64> {
    let shift = features.frame_shift();
    let total = features.len() * shift;
    let slope = model.leaky_slope();
    let scale = model.input_scale();
    let fft_len = model.fft_len();

    let mut h: Vec<Vec<f64>> = features
        .frames()
        .iter()
        .map(|f| f.iter().zip(scale.iter()).map(|(&v, &s)| f64::from(v) * s).collect())
        .collect();
    for layer in model.frame_layers() {
        h = naive_conv1d(&h, &layer_weights(layer), layer.bias());
        leaky(&mut h, slope);
    }
    if positions.is_empty() {
        return vec![0.0; total];
    }

    let hidden = model.hidden();
    let mut hp: Vec<Vec<f64>> = positions
        .iter()
        .map(|&pos| {
            (0..hidden)
                .map(|c| {
                    let column: Vec<f64> = h.iter().map(|row| row[c]).collect();
                    scalar_interp(&column, shift, pos)
                })
                .collect()
        })
        .collect();
    let pulse = model.pulse_layer();
    hp = naive_conv1d(&hp, &layer_weights(pulse), pulse.bias());
    leaky(&mut hp, slope);

    let proj = model.projection();
    let bias = proj.layer().bias();
    let bins = fft_len / 2 + 1;
    let mut out = vec![0.0; total];
    for (p, (&c, (prev, next))) in positions
        .iter()
        .zip(oracle_neighbours(positions, total, fft_len))
        .enumerate()
    {
        let spectrum: Vec<f64> = (0..proj.out_ch())
            .map(|o| bias[o] + (0..hidden).map(|i| proj.effective_weight(o, i) * hp[p][i]).sum::<f64>())
            .collect();
        let half: Vec<(f64, f64)> = (0..bins).map(|k| (spectrum[k], spectrum[bins + k])).collect();
        let frame = naive_idft(&half);
        for (n, o) in out.iter_mut().enumerate() {
            // fragment sample j sits at output sample c - F/2 + j after the
            // half-length rotation
            let j = n as isize - c as isize + (fft_len / 2) as isize;
            if j < 0 || j as usize >= fft_len {
                continue;
            }
            let src = (j as usize + fft_len / 2) % fft_len;
            *o += ola_window(prev, c, next, n) * frame[src];
        }
    }
    out
}
