//! Pulse placement from an F0 track.
//!
//! F0 is linearly interpolated between frame centers, `(t + 0.5) * S`, and
//! held constant before the first and after the last center. Pulses sit where
//! the accumulated phase crosses `k + 0.5` cycles, so the first one lands half
//! a period after the start. Crossing times are rounded to the nearest sample.

use crate::error::{Error, Result};
use crate::types::{FeatureTrack, PulseTrack};

/// Incremental phase accumulator. Frames are pushed one at a time and every
/// crossing whose time is fully determined by the frames seen so far is
/// reported. Batch and streaming synthesis share this so their pulse
/// positions are identical.
#[derive(Debug, Clone)]
pub struct PulseClock {
    sample_rate: f64,
    frame_shift: f64,
    /// Time (samples) up to which phase has been integrated.
    time: f64,
    /// Phase at `time`, in cycles.
    phase: f64,
    /// Next crossing target, `k + 0.5`.
    target: f64,
    last_f0: Option<f64>,
    frames: usize,
    finished: bool,
}

impl PulseClock {
    pub fn new(sample_rate: u32, frame_shift: usize) -> Self {
        Self {
            sample_rate: f64::from(sample_rate),
            frame_shift: frame_shift as f64,
            time: 0.0,
            phase: 0.0,
            target: 0.5,
            last_f0: None,
            frames: 0,
            finished: false,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Time up to which crossings are final.
    pub fn horizon(&self) -> f64 {
        self.time
    }

    /// Feeds the F0 of the next frame, appending newly determined crossing
    /// times (in fractional samples) to `out`.
    pub fn push_frame(&mut self, f0: f64, out: &mut Vec<f64>) {
        debug_assert!(!self.finished);
        let center = (self.frames as f64 + 0.5) * self.frame_shift;
        let start_f0 = self.last_f0.unwrap_or(f0);
        self.integrate(center, start_f0, f0, out);
        self.last_f0 = Some(f0);
        self.frames += 1;
    }

    /// Closes the track at `total_samples`, holding the last F0 constant.
    pub fn finish(&mut self, total_samples: usize, out: &mut Vec<f64>) {
        if self.finished {
            return;
        }
        self.finished = true;
        if let Some(f0) = self.last_f0 {
            let end = total_samples as f64;
            if end > self.time {
                self.integrate(end, f0, f0, out);
            }
        }
    }

    /// Integrates over `[self.time, end]` with F0 linear from `f_a` to `f_b`.
    fn integrate(&mut self, end: f64, f_a: f64, f_b: f64, out: &mut Vec<f64>) {
        let len = end - self.time;
        if len <= 0.0 {
            return;
        }
        // cycles per sample, and its slope over the segment
        let rate_a = f_a / self.sample_rate;
        let rate_b = f_b / self.sample_rate;
        let slope = (rate_b - rate_a) / len;
        let segment_phase = 0.5 * (rate_a + rate_b) * len;
        let end_phase = self.phase + segment_phase;
        while self.target <= end_phase {
            let need = self.target - self.phase;
            // rate_a * x + slope * x^2 / 2 = need, in the cancellation-free form
            let disc = (rate_a * rate_a + 2.0 * slope * need).max(0.0);
            let x = 2.0 * need / (rate_a + disc.sqrt());
            out.push(self.time + x.min(len));
            self.target += 1.0;
        }
        self.time = end;
        self.phase = end_phase;
    }
}

/// Rounds a crossing time to the pulse's sample index.
pub fn crossing_to_sample(t: f64) -> usize {
    t.round().max(0.0) as usize
}

/// Derives glottal pulse positions for a feature track. Each pulse carries
/// the voicing flag of its nearest frame.
pub fn pulses_from_f0(track: &FeatureTrack) -> Result<PulseTrack> {
    track.validate()?;
    let total = track.total_samples();
    let mut clock = PulseClock::new(track.sample_rate(), track.frame_shift());
    let mut times = Vec::new();
    for t in 0..track.len() {
        clock.push_frame(f64::from(track.f0(t)), &mut times);
    }
    clock.finish(total, &mut times);

    let positions: Vec<usize> = times
        .into_iter()
        .map(crossing_to_sample)
        .filter(|&p| p < total)
        .collect();
    let voiced = positions
        .iter()
        .map(|&p| {
            let t = (p / track.frame_shift()).min(track.len() - 1);
            track.voicing(t) > 0.5
        })
        .collect();
    PulseTrack::new(positions, voiced, total, track.sample_rate())
}

/// Average pulse rate in Hz: `(P - 1)` periods over the first-to-last span.
pub fn mean_pulse_rate(track: &PulseTrack) -> Result<f64> {
    let pos = track.positions();
    if pos.len() < 2 {
        return Err(Error::TooFewPulses {
            needed: 2,
            got: pos.len(),
        });
    }
    let span = (pos[pos.len() - 1] - pos[0]) as f64 / f64::from(track.sample_rate());
    Ok((pos.len() - 1) as f64 / span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SAMPLE_RATE;

    #[test]
    fn constant_100hz_pulses_every_480() {
        let track = FeatureTrack::constant(100, 100.0, true);
        let pulses = pulses_from_f0(&track).unwrap();
        assert_eq!(pulses.len(), 100);
        assert_eq!(pulses.positions()[0], 240);
        assert!(pulses.positions().windows(2).all(|w| w[1] - w[0] == 480));
    }

    #[test]
    fn constant_400hz_gap_is_120() {
        let track = FeatureTrack::constant(10, 400.0, true);
        let pulses = pulses_from_f0(&track).unwrap();
        assert_eq!(pulses.len(), 40);
        assert!(pulses.positions().windows(2).all(|w| w[1] - w[0] == 120));
    }

    #[test]
    fn single_low_frame_has_no_pulse() {
        // half a 50 Hz period is exactly one frame, which is the signal end
        let pulses = pulses_from_f0(&FeatureTrack::constant(1, 50.0, true)).unwrap();
        assert!(pulses.is_empty());
    }

    #[test]
    fn voicing_follows_nearest_frame() {
        let mut frames = FeatureTrack::constant(4, 100.0, true).frames().to_vec();
        frames[2][31] = 0.0;
        let pulses = pulses_from_f0(&FeatureTrack::new(frames)).unwrap();
        assert_eq!(pulses.voiced(), &[true, true, false, true]);
    }

    #[test]
    fn mean_rate_examples() {
        let every = |gap: usize, n: usize| {
            let pos: Vec<usize> = (0..n).map(|i| 100 + i * gap).collect();
            PulseTrack::new(pos, vec![true; n], 100_000, SAMPLE_RATE).unwrap()
        };
        assert!((mean_pulse_rate(&every(480, 10)).unwrap() - 100.0).abs() < 1e-12);
        assert!((mean_pulse_rate(&every(120, 10)).unwrap() - 400.0).abs() < 1e-12);
        // gaps 120 + 480 + 240 = 840 samples for 3 periods
        let mixed = PulseTrack::new(vec![0, 120, 600, 840], vec![true; 4], 1000, SAMPLE_RATE).unwrap();
        let expected = 3.0 / (840.0 / 48_000.0);
        assert!((mean_pulse_rate(&mixed).unwrap() - expected).abs() < 1e-9);
        let one = PulseTrack::new(vec![5], vec![true], 10, SAMPLE_RATE).unwrap();
        assert!(matches!(mean_pulse_rate(&one), Err(Error::TooFewPulses { .. })));
    }

    #[test]
    fn invalid_features_are_rejected() {
        let track = FeatureTrack::constant(3, 20.0, true);
        assert!(pulses_from_f0(&track).is_err());
    }
}
