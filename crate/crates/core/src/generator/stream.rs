//! Incremental synthesis with bounded lookahead.
//!
//! Frames are pushed one at a time. Every stage runs as soon as its inputs
//! exist: frame-rate row `t` of conv layer `L` needs row `t + 1` of layer
//! `L - 1`; pulse `q` is resampled once the frame-rate row after its position
//! exists; the pulse-rate conv at `p` needs pulse `p + 1`; fragment `p` is then
//! overlap-added and every sample up to its center is final and emitted.
//!
//! Emitting through sample `n` needs at most
//! `ceil((n + max_gap) / S) + 1 + 4` frames: the next pulse position,
//! one frame for its interpolation neighbour, and the four-frame
//! right context of the frame-rate stack.
//!
//! All arithmetic goes through the same kernels as [`super::synthesize`], so
//! the streamed waveform is identical to the batch one.

use std::collections::VecDeque;
use std::fmt::Display;

use crate::error::{Error, Result};
use crate::generator::conv::{conv_step, leaky_relu};
use crate::generator::model::{GeneratorModel, FRAME_LAYERS};
use crate::generator::spectra::FragmentSynth;
use crate::generator::OpCount;
use crate::pulse::{crossing_to_sample, PulseClock};
use crate::transport::{boundary_next, boundary_prev, PulseSpan, ResampleRow};
use crate::types::{validate_frame, FEATURE_DIM, FRAME_SHIFT, SAMPLE_RATE};

/// Right context of the frame-rate stack, in frames.
pub const RECEPTIVE_FRAMES: usize = FRAME_LAYERS;

/// Rows indexed from a moving base; older rows are dropped once no later
/// stage needs them.
#[derive(Debug, Default)]
struct RowQueue {
    base: usize,
    rows: VecDeque<Vec<f64>>,
}

impl RowQueue {
    fn len(&self) -> usize {
        self.base + self.rows.len()
    }

    fn get(&self, i: usize) -> &[f64] {
        &self.rows[i - self.base]
    }

    fn push(&mut self, row: Vec<f64>) {
        self.rows.push_back(row);
    }

    fn trim_below(&mut self, i: usize) {
        while self.base < i && !self.rows.is_empty() {
            self.rows.pop_front();
            self.base += 1;
        }
    }

    fn held(&self) -> usize {
        self.rows.len()
    }
}

/// One emission event: after `frames` frames had been pushed, output was
/// final through sample `through` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmissionCheckpoint {
    pub frames: usize,
    pub through: usize,
}

/// A single-threaded streaming session over a shared model.
#[derive(Debug)]
pub struct StreamingSynth<'m> {
    model: &'m GeneratorModel,
    frame_shift: usize,
    clock: PulseClock,
    crossings: Vec<f64>,
    frames_in: usize,
    total: Option<usize>,
    /// `levels[0]` holds scaled inputs, `levels[L]` the output of frame conv L.
    levels: Vec<RowQueue>,
    positions: Vec<usize>,
    resampled: RowQueue,
    /// Pulses whose fragment has been overlap-added.
    fragments_done: usize,
    out: VecDeque<f64>,
    /// Index of the first sample still held in `out`.
    emitted: usize,
    synth: FragmentSynth,
    spectrum: Vec<f64>,
    fragment: Vec<f64>,
    zeros_in: Vec<f64>,
    zeros_hidden: Vec<f64>,
    ops: OpCount,
    checkpoints: Vec<EmissionCheckpoint>,
    peak_rows_held: usize,
}

impl<'m> StreamingSynth<'m> {
    pub fn new(model: &'m GeneratorModel) -> Result<Self> {
        model.validate()?;
        let h = model.hidden();
        Ok(Self {
            model,
            frame_shift: FRAME_SHIFT,
            clock: PulseClock::new(SAMPLE_RATE, FRAME_SHIFT),
            crossings: Vec::new(),
            frames_in: 0,
            total: None,
            levels: (0..=FRAME_LAYERS).map(|_| RowQueue::default()).collect(),
            positions: Vec::new(),
            resampled: RowQueue::default(),
            fragments_done: 0,
            out: VecDeque::new(),
            emitted: 0,
            synth: FragmentSynth::new(model.fft_len())?,
            spectrum: vec![0.0; model.out_channels()],
            fragment: vec![0.0; model.fft_len()],
            zeros_in: vec![0.0; FEATURE_DIM],
            zeros_hidden: vec![0.0; h],
            ops: OpCount::default(),
            checkpoints: Vec::new(),
            peak_rows_held: 0,
        })
    }

    pub fn frames_pushed(&self) -> usize {
        self.frames_in
    }

    pub fn samples_emitted(&self) -> usize {
        self.emitted
    }

    pub fn ops(&self) -> OpCount {
        self.ops
    }

    pub fn checkpoints(&self) -> &[EmissionCheckpoint] {
        &self.checkpoints
    }

    /// Pulse positions placed so far.
    pub fn pulse_positions(&self) -> &[usize] {
        &self.positions
    }

    /// Largest number of buffered activation rows seen at once.
    pub fn peak_rows_held(&self) -> usize {
        self.peak_rows_held
    }

    /// Pushes one raw feature frame and returns newly final samples.
    pub fn push_frame(&mut self, frame: &[f32]) -> Result<Vec<f64>> {
        if self.total.is_some() {
            return Err(Error::Config("frame pushed after finish".into()));
        }
        validate_frame(frame).map_err(|violation| Error::InvalidFeature {
            frame: self.frames_in,
            violation,
        })?;
        let mut scaled = vec![0.0; FEATURE_DIM];
        self.model.scale_frame(frame, &mut scaled)?;
        self.levels[0].push(scaled);
        self.frames_in += 1;

        self.crossings.clear();
        self.clock
            .push_frame(f64::from(frame[crate::types::F0_INDEX]), &mut self.crossings);
        self.positions
            .extend(self.crossings.iter().map(|&t| crossing_to_sample(t)));

        let before = self.emitted;
        self.advance()?;
        let out = self.drain(false);
        if self.emitted > before {
            self.checkpoints.push(EmissionCheckpoint {
                frames: self.frames_in,
                through: self.emitted - 1,
            });
        }
        Ok(out)
    }

    /// Ends the utterance and returns the remaining samples.
    pub fn finish(&mut self) -> Result<Vec<f64>> {
        if self.total.is_some() {
            return Ok(Vec::new());
        }
        let total = self.frames_in * self.frame_shift;
        self.total = Some(total);
        self.crossings.clear();
        self.clock.finish(total, &mut self.crossings);
        self.positions.extend(
            self.crossings
                .iter()
                .map(|&t| crossing_to_sample(t))
                .filter(|&p| p < total),
        );
        self.advance()?;
        Ok(self.drain(true))
    }

    fn advance(&mut self) -> Result<()> {
        self.advance_frame_layers();
        self.advance_resample();
        self.advance_pulses()?;
        let held = self.levels.iter().map(RowQueue::held).sum::<usize>() + self.resampled.held();
        self.peak_rows_held = self.peak_rows_held.max(held);
        Ok(())
    }

    fn advance_frame_layers(&mut self) {
        let final_ = self.total.is_some();
        let slope = self.model.leaky_slope();
        for l in 1..=FRAME_LAYERS {
            let layer = &self.model.frame_layers()[l - 1];
            let zeros = if l == 1 { &self.zeros_in } else { &self.zeros_hidden };
            loop {
                let (lower, upper) = self.levels.split_at_mut(l);
                let src = &lower[l - 1];
                let dst = &mut upper[0];
                let t = dst.len();
                if t >= src.len() || (t + 1 >= src.len() && !final_) {
                    break;
                }
                let prev = if t == 0 { zeros.as_slice() } else { src.get(t - 1) };
                let next = if t + 1 < src.len() {
                    src.get(t + 1)
                } else {
                    zeros.as_slice()
                };
                let taps = [prev, src.get(t), next];
                let mut row = vec![0.0; layer.out_ch()];
                conv_step(layer, &taps, &mut row, &mut self.ops);
                leaky_relu(&mut row, slope);
                dst.push(row);
                // row t of this level is still needed as the left tap of t + 1
                lower[l - 1].trim_below(t);
            }
        }
    }

    fn advance_resample(&mut self) {
        let top = FRAME_LAYERS;
        loop {
            let q = self.resampled.len();
            let Some(&pos) = self.positions.get(q) else { break };
            let available = self.levels[top].len();
            let row = match self.total {
                Some(_) => ResampleRow::for_position(pos, self.frame_shift, self.frames_in),
                None => {
                    // without the track length there is no end clamp; valid
                    // once the right neighbour exists
                    let row = ResampleRow::for_position(pos, self.frame_shift, usize::MAX);
                    if row.right >= available {
                        break;
                    }
                    row
                }
            };
            let level = &self.levels[top];
            let mut out = vec![0.0; self.model.hidden()];
            row.apply(level.get(row.left), level.get(row.right), &mut out);
            self.resampled.push(out);
            if let Some(&next) = self.positions.get(q + 1) {
                let row = ResampleRow::for_position(next, self.frame_shift, self.frames_in.max(1));
                self.levels[top].trim_below(row.left);
            }
        }
    }

    fn advance_pulses(&mut self) -> Result<()> {
        let final_ = self.total.is_some();
        let slope = self.model.leaky_slope();
        let fft_len = self.model.fft_len();
        let bins = self.model.bins();
        loop {
            let p = self.fragments_done;
            let have = self.resampled.len();
            if p >= have || (p + 1 >= have && !(final_ && p + 1 == self.positions.len())) {
                break;
            }
            let prev = if p == 0 {
                self.zeros_hidden.as_slice()
            } else {
                self.resampled.get(p - 1)
            };
            let next = if p + 1 < have {
                self.resampled.get(p + 1)
            } else {
                self.zeros_hidden.as_slice()
            };
            let taps = [prev, self.resampled.get(p), next];
            let mut hidden = vec![0.0; self.model.hidden()];
            conv_step(self.model.pulse_layer(), &taps, &mut hidden, &mut self.ops);
            leaky_relu(&mut hidden, slope);

            self.model
                .projection()
                .apply_row(&hidden, &mut self.spectrum, &mut self.ops);
            self.synth
                .fragment(&self.spectrum[..bins], &self.spectrum[bins..], &mut self.fragment)?;

            let span = self.span(p);
            let half = (span.center - span.prev).max(span.next - span.center);
            if half > fft_len / 2 {
                return Err(Error::WindowTooWide {
                    half,
                    limit: fft_len / 2,
                });
            }
            let support = span.support(fft_len);
            let end = support.end() + 1 - self.emitted;
            if self.out.len() < end {
                self.out.resize(end, 0.0);
            }
            for n in support {
                self.out[n - self.emitted] += span.window(n) * self.fragment[n + fft_len / 2 - span.center];
            }
            self.fragments_done += 1;
            if p >= 1 {
                self.resampled.trim_below(p);
            }
        }
        Ok(())
    }

    fn span(&self, p: usize) -> PulseSpan {
        let fft_len = self.model.fft_len();
        let centers = &self.positions;
        let prev = if p == 0 {
            boundary_prev(centers, fft_len)
        } else {
            centers[p - 1]
        };
        let next = match (centers.get(p + 1), self.total) {
            (Some(&c), _) => c,
            (None, Some(total)) => boundary_next(centers, total, fft_len),
            (None, None) => unreachable!("pulse conv waits for the next pulse"),
        };
        PulseSpan {
            prev,
            center: centers[p],
            next,
        }
    }

    fn drain(&mut self, final_: bool) -> Vec<f64> {
        let through = if final_ {
            self.total.unwrap_or(0)
        } else if self.fragments_done == 0 {
            return Vec::new();
        } else {
            self.positions[self.fragments_done - 1] + 1
        };
        if through <= self.emitted {
            return Vec::new();
        }
        let n = through - self.emitted;
        if self.out.len() < n {
            self.out.resize(n, 0.0);
        }
        self.emitted = through;
        self.out.drain(..n).collect()
    }
}

/// Summary of a streamed utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamReport {
    pub frames: usize,
    pub samples: usize,
    pub ops: OpCount,
    pub checkpoints: Vec<EmissionCheckpoint>,
    pub pulse_positions: Vec<usize>,
}

impl StreamReport {
    /// Largest observed gap between consecutive pulses.
    pub fn max_gap(&self) -> Option<usize> {
        self.pulse_positions.windows(2).map(|w| w[1] - w[0]).max()
    }
}

/// Frames allowed before sample `n` must be out, for a track whose
/// largest pulse gap is `max_gap`: one future pulse position plus the
/// frame-rate receptive field.
pub fn lookahead_contract(n: usize, max_gap: usize, frame_shift: usize) -> usize {
    (n + max_gap).div_ceil(frame_shift) + 1 + RECEPTIVE_FRAMES
}

/// Frames after which sample `n` is guaranteed to be out. The pulse-rate
/// convolution reads one pulse ahead of the fragment that closes sample
/// `n`, so two future pulse positions are needed rather than one.
pub fn lookahead_bound(n: usize, max_gap: usize, frame_shift: usize) -> usize {
    (n + 2 * max_gap).div_ceil(frame_shift) + 1 + RECEPTIVE_FRAMES
}

/// Drives a session from a frame source, passing emitted samples to `sink`.
/// A source error is treated as starvation: remaining output is flushed
/// with the end-of-utterance boundary rule and the error is reported.
pub fn synthesize_streaming<I, E>(
    model: &GeneratorModel,
    source: I,
    mut sink: impl FnMut(&[f64]),
) -> Result<StreamReport>
where
    I: IntoIterator<Item = std::result::Result<Vec<f32>, E>>,
    E: Display,
{
    let mut session = StreamingSynth::new(model)?;
    for item in source {
        match item {
            Ok(frame) => sink(&session.push_frame(&frame)?),
            Err(e) => {
                sink(&session.finish()?);
                return Err(Error::Starved {
                    frames: session.frames_pushed(),
                    reason: e.to_string(),
                });
            }
        }
    }
    sink(&session.finish()?);
    Ok(StreamReport {
        frames: session.frames_pushed(),
        samples: session.samples_emitted(),
        ops: session.ops(),
        checkpoints: session.checkpoints().to_vec(),
        pulse_positions: session.pulse_positions().to_vec(),
    })
}
