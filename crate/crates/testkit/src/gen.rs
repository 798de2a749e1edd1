//! Seeded generators for in-range test data.

use puffin_core::generator::{GeneratorModel, ModelConfig};
use puffin_core::types::{FeatureTrack, F0_INDEX, F0_MAX, F0_MIN, FEATURE_DIM, N_MFCC, VOICING_INDEX};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth random F0 contour: a bounded random walk in log frequency with
/// occasional jumps, clamped to the valid range.
pub fn random_f0_track(rng: &mut impl Rng, n_frames: usize) -> Vec<f32> {
    let (lo, hi) = (f64::from(F0_MIN).ln(), f64::from(F0_MAX).ln());
    let mut v = rng.random_range(lo..hi);
    (0..n_frames)
        .map(|_| {
            if rng.random_bool(0.05) {
                v = rng.random_range(lo..hi);
            } else {
                v = (v + rng.random_range(-0.08..0.08)).clamp(lo, hi);
            }
            (v.exp() as f32).clamp(F0_MIN, F0_MAX)
        })
        .collect()
}

/// Valid feature frames with random cepstra, F0 contour and voicing runs.
pub fn random_features(rng: &mut impl Rng, n_frames: usize) -> FeatureTrack {
    let f0 = random_f0_track(rng, n_frames);
    let mut voiced = rng.random_bool(0.5);
    let frames = f0
        .into_iter()
        .map(|f| {
            if rng.random_bool(0.1) {
                voiced = !voiced;
            }
            let mut frame = vec![0.0f32; FEATURE_DIM];
            frame[0] = rng.random_range(-40.0..10.0);
            for c in frame.iter_mut().take(N_MFCC).skip(1) {
                *c = rng.random_range(-8.0..8.0);
            }
            frame[F0_INDEX] = f;
            frame[VOICING_INDEX] = if voiced { 1.0 } else { 0.0 };
            frame
        })
        .collect();
    FeatureTrack::new(frames)
}

/// Strictly increasing positions in `[0, total)` with gaps in `[min_gap, max_gap]`.
pub fn random_pulse_positions(rng: &mut impl Rng, total: usize, min_gap: usize, max_gap: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = rng.random_range(0..max_gap.min(total).max(1));
    while p < total {
        out.push(p);
        p += rng.random_range(min_gap..=max_gap);
    }
    out
}

/// A full-width (F = 2048) model with a small hidden size.
pub fn random_model(seed: u64, hidden: usize, sparse: bool) -> GeneratorModel {
    GeneratorModel::random(
        ModelConfig {
            hidden,
            sparse,
            ..ModelConfig::standard()
        },
        seed,
    )
}
