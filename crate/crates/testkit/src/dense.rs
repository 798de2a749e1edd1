//! Explicit matrices for the resampling and overlap-add operators.

use std::f64::consts::FRAC_PI_2;

use crate::naive::scalar_interp;

/// Largest P·F a dense overlap-add matrix may have.
pub const DENSE_OLA_LIMIT: usize = 1_000_000;

/// P×T matrix whose row `p` interpolates a per-frame sequence at `positions[p]`.
/// Column `t` is found by interpolating the unit sequence `e_t`.
pub fn dense_resample_matrix(positions: &[usize], shift: usize, n_frames: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n_frames]; positions.len()];
    let mut unit = vec![0.0; n_frames];
    for t in 0..n_frames {
        unit[t] = 1.0;
        for (p, &pos) in positions.iter().enumerate() {
            m[p][t] = scalar_interp(&unit, shift, pos);
        }
        unit[t] = 0.0;
    }
    m
}

/// Tapered window of one pulse at sample `n`: `sin^2` rising from `prev` to
/// `center`, `cos^2` falling from `center` to `next`.
pub fn ola_window(prev: usize, center: usize, next: usize, n: usize) -> f64 {
    if n == center {
        return 1.0;
    }
    if n <= prev || n >= next {
        return 0.0;
    }
    if n < center {
        let u = (n - prev) as f64 / (center - prev) as f64;
        (FRAC_PI_2 * u).sin().powi(2)
    } else {
        let u = (n - center) as f64 / (next - center) as f64;
        (FRAC_PI_2 * u).cos().powi(2)
    }
}

/// Neighbour positions for every pulse. Inner pulses use their real
/// neighbours; the outermost ones mirror the adjacent gap (a quarter of the
/// fragment length when there is only one pulse), kept inside the signal.
pub fn oracle_neighbours(centers: &[usize], total: usize, fft_len: usize) -> Vec<(usize, usize)> {
    let n = centers.len();
    (0..n)
        .map(|p| {
            let prev = if p > 0 {
                centers[p - 1]
            } else {
                let gap = if n > 1 { centers[1] - centers[0] } else { fft_len / 4 };
                centers[0].saturating_sub(gap)
            };
            let next = if p + 1 < n {
                centers[p + 1]
            } else {
                let gap = if n > 1 {
                    centers[n - 1] - centers[n - 2]
                } else {
                    fft_len / 4
                };
                let want = centers[n - 1] + gap;
                if want > total - 1 {
                    total - 1
                } else {
                    want
                }
            };
            (prev, next)
        })
        .collect()
}

/// The (total)×(P·F) overlap-add matrix. Entry `(n, p·F + j)` is the
/// window of pulse `p` at `n` when `j = n - center + F/2` indexes the fragment.
pub fn dense_ola_matrix(centers: &[usize], fft_len: usize, total: usize) -> Result<Vec<Vec<f64>>, String> {
    let cols = centers.len() * fft_len;
    if cols > DENSE_OLA_LIMIT {
        return Err(format!("P*F = {cols} exceeds {DENSE_OLA_LIMIT}"));
    }
    let mut m = vec![vec![0.0; cols]; total];
    for (p, (&c, (prev, next))) in centers
        .iter()
        .zip(oracle_neighbours(centers, total, fft_len))
        .enumerate()
    {
        for (n, row) in m.iter_mut().enumerate() {
            let j = n as isize - c as isize + (fft_len / 2) as isize;
            if j >= 0 && (j as usize) < fft_len {
                row[p * fft_len + j as usize] = ola_window(prev, c, next, n);
            }
        }
    }
    Ok(m)
}

pub fn apply_dense(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols).map(|c| m.iter().map(|row| row[c]).collect()).collect()
}
