//! Slow reference implementations for checking `puffin-core`.
//!
//! Everything here is written from the textbook definition, with plain
//! nested loops over `Vec`s. None of it calls the production kernels it is
//! used to check; only the shared data types and model accessors come from
//! `puffin-core`.

#![allow(clippy::needless_range_loop)]

pub mod dense;
pub mod gen;
pub mod naive;
pub mod pipeline;
pub mod pulses;
pub mod spectral;

pub use dense::{apply_dense, dense_ola_matrix, dense_resample_matrix, ola_window, transpose};
pub use gen::{random_f0_track, random_features, random_model, random_pulse_positions, rng};
pub use naive::{naive_conv1d, naive_conv2d, naive_dft, naive_idft, scalar_interp};
pub use pipeline::reference_synthesize;
pub use pulses::brute_force_pulses;
pub use spectral::{naive_mfcc, naive_stft_magnitude};

/// Largest relative difference between two equal-length slices, measured
/// against the larger of `floor` and the reference magnitude.
pub fn max_rel_diff(got: &[f64], want: &[f64], floor: f64) -> f64 {
    assert_eq!(got.len(), want.len(), "length mismatch");
    let scale = want.iter().fold(floor, |m, v| m.max(v.abs()));
    got.iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len(), "length mismatch");
    got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
