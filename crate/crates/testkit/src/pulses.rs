//! Sample-by-sample phase accumulation.

use crate::naive::scalar_interp;

/// Pulse sample indices from a per-frame F0 track, found by stepping the
/// phase one sample at a time with the F0 interpolated at each sample's
/// midpoint. A pulse is placed at whichever sample end is closer to the
/// crossing of each `k + 0.5` cycle mark.
pub fn brute_force_pulses(f0: &[f64], shift: usize, sample_rate: f64) -> Vec<usize> {
    let total = f0.len() * shift;
    let mut out = Vec::new();
    let mut phase = 0.0;
    let mut target = 0.5;
    for n in 0..total {
        let mid = interp_mid(f0, shift, n);
        let next = phase + mid / sample_rate;
        while next >= target {
            let frac = (target - phase) / (next - phase);
            out.push(if frac < 0.5 { n } else { n + 1 });
            target += 1.0;
        }
        phase = next;
    }
    out.retain(|&p| p < total);
    out
}

fn interp_mid(f0: &[f64], shift: usize, n: usize) -> f64 {
    // average of the values at n and n + 1 approximates the midpoint
    0.5 * (scalar_interp(f0, shift, n) + scalar_interp(f0, shift, n + 1))
}
