//! Feature, pulse and waveform data shared by every stage.

use std::path::Path;

use crate::error::{Error, FeatureViolation, Result};

pub const SAMPLE_RATE: u32 = 48_000;
/// Samples per 10 ms feature frame at 48 kHz.
pub const FRAME_SHIFT: usize = 480;
pub const FEATURE_DIM: usize = 32;
pub const N_MFCC: usize = 30;
pub const F0_INDEX: usize = 30;
pub const VOICING_INDEX: usize = 31;
pub const F0_MIN: f32 = 50.0;
pub const F0_MAX: f32 = 400.0;

/// Fixed-rate acoustic features: 30 MFCCs, F0 (interpolated through unvoiced
/// regions) and a hard voicing flag per 10 ms frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTrack {
    frames: Vec<Vec<f32>>,
    sample_rate: u32,
    frame_shift: usize,
}

impl FeatureTrack {
    /// Wraps frames without checking them; see [`FeatureTrack::validate`].
    pub fn new(frames: Vec<Vec<f32>>) -> Self {
        Self {
            frames,
            sample_rate: SAMPLE_RATE,
            frame_shift: FRAME_SHIFT,
        }
    }

    /// Builds and validates a track in one step.
    pub fn try_new(frames: Vec<Vec<f32>>) -> Result<Self> {
        let track = Self::new(frames);
        track.validate()?;
        Ok(track)
    }

    /// Constant-valued frames; handy for benchmarks and tests.
    pub fn constant(n_frames: usize, f0: f32, voiced: bool) -> Self {
        let mut frame = vec![0.0; FEATURE_DIM];
        frame[F0_INDEX] = f0;
        frame[VOICING_INDEX] = if voiced { 1.0 } else { 0.0 };
        Self::new(vec![frame; n_frames])
    }

    /// Builds frames from per-frame F0 values with zero cepstra.
    pub fn from_f0(f0: &[f32], voiced: bool) -> Self {
        let frames = f0
            .iter()
            .map(|&f| {
                let mut frame = vec![0.0; FEATURE_DIM];
                frame[F0_INDEX] = f;
                frame[VOICING_INDEX] = if voiced { 1.0 } else { 0.0 };
                frame
            })
            .collect();
        Self::new(frames)
    }

    pub fn frames(&self) -> &[Vec<f32>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame_shift(&self) -> usize {
        self.frame_shift
    }

    /// T·S, the length of the synthesized waveform.
    pub fn total_samples(&self) -> usize {
        self.frames.len() * self.frame_shift
    }

    pub fn f0(&self, t: usize) -> f32 {
        self.frames[t][F0_INDEX]
    }

    pub fn voicing(&self, t: usize) -> f32 {
        self.frames[t][VOICING_INDEX]
    }

    /// Checks every frame, reporting the first offending one.
    pub fn validate(&self) -> Result<()> {
        self.frames.iter().enumerate().try_for_each(|(t, frame)| {
            validate_frame(frame).map_err(|violation| Error::InvalidFeature { frame: t, violation })
        })
    }

    /// Decodes the raw feature file layout: little-endian f32, 32 per frame,
    /// frame-major. A trailing partial frame is kept so that validation can
    /// report it as a width error.
    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(4) {
            return Err(Error::FeatureFormat(format!(
                "{} bytes is not a whole number of f32 values",
                bytes.len()
            )));
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let frames = values.chunks(FEATURE_DIM).map(<[f32]>::to_vec).collect();
        Ok(Self::new(frames))
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.frames
            .iter()
            .flat_map(|f| f.iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_le_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_le_bytes())?;
        Ok(())
    }
}

/// Validates a single frame against the feature invariants.
pub fn validate_frame(frame: &[f32]) -> std::result::Result<(), FeatureViolation> {
    if frame.len() != FEATURE_DIM {
        return Err(FeatureViolation::FrameWidth { got: frame.len() });
    }
    if let Some(index) = frame[..N_MFCC].iter().position(|v| !v.is_finite()) {
        return Err(FeatureViolation::NonFinite { index });
    }
    let f0 = frame[F0_INDEX];
    // written this way round so NaN fails too
    if !(F0_MIN..=F0_MAX).contains(&f0) {
        return Err(FeatureViolation::F0Range { f0 });
    }
    let v = frame[VOICING_INDEX];
    if v != 0.0 && v != 1.0 {
        return Err(FeatureViolation::Voicing { value: v });
    }
    Ok(())
}

/// Glottal pulse positions in output samples, with per-pulse voicing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseTrack {
    positions: Vec<usize>,
    voiced: Vec<bool>,
    total_samples: usize,
    sample_rate: u32,
}

impl PulseTrack {
    /// Validates ordering, range and the [sr/400, sr/50] gap bounds.
    pub fn new(positions: Vec<usize>, voiced: Vec<bool>, total_samples: usize, sample_rate: u32) -> Result<Self> {
        if positions.len() != voiced.len() {
            return Err(Error::InvalidPulses(format!(
                "{} positions but {} voicing flags",
                positions.len(),
                voiced.len()
            )));
        }
        let (min_gap, max_gap) = gap_bounds(sample_rate);
        for (p, w) in positions.windows(2).enumerate() {
            let gap = w[1]
                .checked_sub(w[0])
                .filter(|&g| g > 0)
                .ok_or_else(|| Error::InvalidPulses(format!("positions not strictly increasing at pulse {}", p + 1)))?;
            if gap < min_gap || gap > max_gap {
                return Err(Error::InvalidPulses(format!(
                    "gap of {gap} samples between pulses {p} and {} outside [{min_gap}, {max_gap}]",
                    p + 1
                )));
            }
        }
        if let Some(&last) = positions.last() {
            if last >= total_samples {
                return Err(Error::InvalidPulses(format!(
                    "pulse at {last} is beyond the signal end {total_samples}"
                )));
            }
        }
        Ok(Self {
            positions,
            voiced,
            total_samples,
            sample_rate,
        })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn voiced(&self) -> &[bool] {
        &self.voiced
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_samples(&self) -> usize {
        self.total_samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Largest gap between consecutive pulses, if there are at least two.
    pub fn max_gap(&self) -> Option<usize> {
        self.positions.windows(2).map(|w| w[1] - w[0]).max()
    }

    /// Pulse times in seconds, one per line.
    pub fn to_pitchmark_text(&self) -> String {
        let sr = f64::from(self.sample_rate);
        self.positions
            .iter()
            .map(|&p| format!("{:.6}\n", p as f64 / sr))
            .collect()
    }
}

/// Inclusive gap bounds, in samples, for F0 in [50, 400] Hz.
pub fn gap_bounds(sample_rate: u32) -> (usize, usize) {
    let sr = sample_rate as usize;
    (sr / F0_MAX as usize, sr / F0_MIN as usize)
}

/// Parses a pitchmark file (UTF-8, one pulse time in seconds per line) into
/// sample positions. Blank lines are skipped.
pub fn parse_pitchmarks(text: &str, sample_rate: u32) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let secs: f64 = l
                .trim()
                .parse()
                .map_err(|e| Error::FeatureFormat(format!("pitchmark line {}: {e}", i + 1)))?;
            if !secs.is_finite() || secs < 0.0 {
                return Err(Error::FeatureFormat(format!(
                    "pitchmark line {}: {secs} is not a valid time",
                    i + 1
                )));
            }
            Ok((secs * f64::from(sample_rate)).round() as usize)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_track_is_valid() {
        let track = FeatureTrack::constant(512, 120.0, true);
        assert!(track.validate().is_ok());
        assert_eq!(track.total_samples(), 512 * 480);
    }

    #[test]
    fn short_frame_is_a_width_error() {
        let mut frames = FeatureTrack::constant(4, 120.0, true).frames().to_vec();
        frames[2].pop();
        let err = FeatureTrack::new(frames).validate().unwrap_err();
        match err {
            Error::InvalidFeature { frame, violation } => {
                assert_eq!(frame, 2);
                assert_eq!(violation, FeatureViolation::FrameWidth { got: 31 });
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn low_f0_is_a_range_error() {
        let mut frames = FeatureTrack::constant(3, 120.0, true).frames().to_vec();
        frames[1][F0_INDEX] = 30.0;
        let err = FeatureTrack::new(frames).validate().unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidFeature {
                frame: 1,
                violation: FeatureViolation::F0Range { .. }
            }
        ));
    }

    #[test]
    fn nan_f0_and_fractional_voicing_rejected() {
        let mut frame = vec![0.0; FEATURE_DIM];
        frame[F0_INDEX] = f32::NAN;
        assert!(matches!(validate_frame(&frame), Err(FeatureViolation::F0Range { .. })));
        frame[F0_INDEX] = 100.0;
        frame[VOICING_INDEX] = 0.5;
        assert!(matches!(validate_frame(&frame), Err(FeatureViolation::Voicing { .. })));
        frame[VOICING_INDEX] = 0.0;
        frame[3] = f32::INFINITY;
        assert_eq!(validate_frame(&frame), Err(FeatureViolation::NonFinite { index: 3 }));
    }

    #[test]
    fn feature_bytes_round_trip() {
        let track = FeatureTrack::constant(3, 200.0, false);
        let back = FeatureTrack::from_le_bytes(&track.to_le_bytes()).unwrap();
        assert_eq!(back, track);
        assert!(FeatureTrack::from_le_bytes(&[0u8; 5]).is_err());
    }

    #[test]
    fn pulse_track_rejects_close_pulses() {
        assert!(PulseTrack::new(vec![100, 219], vec![true; 2], 1000, SAMPLE_RATE).is_err());
        assert!(PulseTrack::new(vec![100, 220], vec![true; 2], 1000, SAMPLE_RATE).is_ok());
        assert!(PulseTrack::new(vec![100, 1061], vec![true; 2], 2000, SAMPLE_RATE).is_err());
        assert!(PulseTrack::new(vec![100, 100], vec![true; 2], 2000, SAMPLE_RATE).is_err());
        assert!(PulseTrack::new(vec![100], vec![true], 100, SAMPLE_RATE).is_err());
    }

    #[test]
    fn pitchmarks_parse() {
        let marks = parse_pitchmarks("0.005\n\n0.0100\n", SAMPLE_RATE).unwrap();
        assert_eq!(marks, vec![240, 480]);
        assert!(parse_pitchmarks("abc\n", SAMPLE_RATE).is_err());
        assert!(parse_pitchmarks("-1\n", SAMPLE_RATE).is_err());
    }
}
