//! Rate-transport operators: the frame-to-pulse resampler R and the
//! pitch-synchronous overlap-add operator O.
//!
//! Neither is ever materialized. R stores two frame indices and a weight per
//! pulse; O stores a `(prev, center, next)` triple per pulse and regenerates
//! its asymmetric Hann windows on demand. Both come with adjoints so they can
//! be used on a backward pass.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::types::{FeatureTrack, PulseTrack};

/// One row of R: `out = w_left * a[left] + (1 - w_left) * a[right]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleRow {
    pub left: usize,
    pub right: usize,
    pub w_left: f64,
}

impl ResampleRow {
    /// Row for a pulse at sample `position` over `n_frames` frames whose
    /// centers sit at `(t + 0.5) * frame_shift`. Clamped at the track edges.
    pub fn for_position(position: usize, frame_shift: usize, n_frames: usize) -> Self {
        assert!(n_frames > 0, "resampling needs at least one frame");
        let x = position as f64 / frame_shift as f64 - 0.5;
        let last = n_frames - 1;
        if x <= 0.0 {
            Self {
                left: 0,
                right: 1.min(last),
                w_left: 1.0,
            }
        } else if x >= last as f64 {
            Self {
                left: last,
                right: last,
                w_left: 1.0,
            }
        } else {
            let left = x.floor() as usize;
            Self {
                left,
                right: left + 1,
                w_left: 1.0 - (x - left as f64),
            }
        }
    }

    #[inline]
    pub fn apply(&self, a_left: &[f64], a_right: &[f64], out: &mut [f64]) {
        let w = self.w_left;
        let v = 1.0 - w;
        for ((o, &l), &r) in out.iter_mut().zip(a_left).zip(a_right) {
            *o = w * l + v * r;
        }
    }
}

/// The P×T linear-interpolation resampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleOp {
    n_frames: usize,
    rows: Vec<ResampleRow>,
}

impl ResampleOp {
    pub fn new(pulse_positions: &[usize], frame_shift: usize, n_frames: usize) -> Result<Self> {
        if n_frames == 0 && !pulse_positions.is_empty() {
            return Err(Error::Shape("cannot resample pulses from zero frames".into()));
        }
        let rows = pulse_positions
            .iter()
            .map(|&p| ResampleRow::for_position(p, frame_shift, n_frames))
            .collect();
        Ok(Self { n_frames, rows })
    }

    pub fn rows(&self) -> &[ResampleRow] {
        &self.rows
    }

    pub fn n_pulses(&self) -> usize {
        self.rows.len()
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    fn check_frames(&self, m: &Matrix) -> Result<()> {
        if m.rows() != self.n_frames {
            return Err(Error::Shape(format!(
                "resampler expects {} frame rows, got {}",
                self.n_frames,
                m.rows()
            )));
        }
        Ok(())
    }

    /// R·A for activations `A` of shape T×H.
    pub fn apply(&self, activations: &Matrix) -> Result<Matrix> {
        self.check_frames(activations)?;
        let mut out = Matrix::zeros(self.rows.len(), activations.cols());
        for (p, row) in self.rows.iter().enumerate() {
            row.apply(activations.row(row.left), activations.row(row.right), out.row_mut(p));
        }
        Ok(out)
    }

    /// Rᵀ·G for a pulse-rate gradient `G` of shape P×H.
    pub fn apply_adjoint(&self, grad: &Matrix) -> Result<Matrix> {
        if grad.rows() != self.rows.len() {
            return Err(Error::Shape(format!(
                "resampler adjoint expects {} pulse rows, got {}",
                self.rows.len(),
                grad.rows()
            )));
        }
        let mut out = Matrix::zeros(self.n_frames, grad.cols());
        for (p, row) in self.rows.iter().enumerate() {
            let g = grad.row(p);
            for (o, &v) in out.row_mut(row.left).iter_mut().zip(g) {
                *o += row.w_left * v;
            }
            let w_right = 1.0 - row.w_left;
            for (o, &v) in out.row_mut(row.right).iter_mut().zip(g) {
                *o += w_right * v;
            }
        }
        Ok(out)
    }
}

/// Builds R for a feature track and its pulses.
pub fn build_resample(track: &FeatureTrack, pulses: &PulseTrack) -> Result<ResampleOp> {
    if pulses.total_samples() != track.total_samples() {
        return Err(Error::Shape(format!(
            "pulse track covers {} samples, features cover {}",
            pulses.total_samples(),
            track.total_samples()
        )));
    }
    ResampleOp::new(pulses.positions(), track.frame_shift(), track.len())
}

/// Window geometry of one pulse: rising half over `[prev, center]`, falling
/// half over `[center, next]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseSpan {
    pub prev: usize,
    pub center: usize,
    pub next: usize,
}

impl PulseSpan {
    /// Window value at output sample `n`; zero outside `[prev, next]`.
    #[inline]
    pub fn window(&self, n: usize) -> f64 {
        use std::f64::consts::PI;
        if n < self.prev || n > self.next {
            0.0
        } else if n <= self.center {
            if self.center == self.prev {
                return 1.0;
            }
            let u = (n - self.prev) as f64 / (self.center - self.prev) as f64;
            0.5 - 0.5 * (PI * u).cos()
        } else {
            let u = (n - self.center) as f64 / (self.next - self.center) as f64;
            0.5 + 0.5 * (PI * u).cos()
        }
    }

    /// Output samples this pulse can write to, given fragment length `fft_len`:
    /// the window's nonzero support.
    pub fn support(&self, fft_len: usize) -> std::ops::RangeInclusive<usize> {
        let lo = if self.prev < self.center {
            self.prev + 1
        } else {
            self.center
        };
        let hi = if self.next > self.center {
            self.next - 1
        } else {
            self.center
        };
        let hi = hi.min(self.center + fft_len / 2 - 1);
        lo..=hi
    }

    pub fn support_len(&self, fft_len: usize) -> usize {
        let r = self.support(fft_len);
        r.end() + 1 - r.start()
    }
}

/// Edge distance used when only one pulse exists and no gap is available.
pub fn fallback_gap(fft_len: usize) -> usize {
    fft_len / 4
}

/// Synthesizes the missing outer neighbors of the first and last pulse. Each
/// boundary pulse reuses the gap to its single real neighbor, clamped to
/// `[0, total_samples - 1]`.
pub fn boundary_prev(centers: &[usize], fft_len: usize) -> usize {
    let gap = match centers {
        [a, b, ..] => b - a,
        _ => fallback_gap(fft_len),
    };
    centers[0].saturating_sub(gap)
}

pub fn boundary_next(centers: &[usize], total_samples: usize, fft_len: usize) -> usize {
    let n = centers.len();
    let gap = if n >= 2 {
        centers[n - 1] - centers[n - 2]
    } else {
        fallback_gap(fft_len)
    };
    (centers[n - 1] + gap).min(total_samples.saturating_sub(1))
}

/// The (T·S)×(P·F) overlap-add operator stored as per-pulse geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OlaOp {
    fft_len: usize,
    total_samples: usize,
    spans: Vec<PulseSpan>,
}

pub const OLA_MAGIC: &[u8; 4] = b"POLA";
pub const OLA_VERSION: u32 = 1;
pub const OLA_HEADER_LEN: usize = 24;

impl OlaOp {
    /// Builds O from strictly increasing pulse centers.
    pub fn from_centers(centers: &[usize], total_samples: usize, fft_len: usize) -> Result<Self> {
        if centers.is_empty() {
            return Self::from_spans(Vec::new(), total_samples, fft_len);
        }
        let n = centers.len();
        let mut spans = Vec::with_capacity(n);
        for p in 0..n {
            let prev = if p == 0 {
                boundary_prev(centers, fft_len)
            } else {
                centers[p - 1]
            };
            let next = if p + 1 == n {
                boundary_next(centers, total_samples, fft_len)
            } else {
                centers[p + 1]
            };
            spans.push(PulseSpan {
                prev,
                center: centers[p],
                next,
            });
        }
        Self::from_spans(spans, total_samples, fft_len)
    }

    /// Validates explicit per-pulse geometry.
    pub fn from_spans(spans: Vec<PulseSpan>, total_samples: usize, fft_len: usize) -> Result<Self> {
        if fft_len < 2 || !fft_len.is_power_of_two() {
            return Err(Error::FftLength(fft_len));
        }
        let limit = fft_len / 2;
        for (p, s) in spans.iter().enumerate() {
            if !(s.prev <= s.center && s.center <= s.next) {
                return Err(Error::InvalidPulses(format!(
                    "pulse {p}: span ({}, {}, {}) is not ordered",
                    s.prev, s.center, s.next
                )));
            }
            if s.next >= total_samples {
                return Err(Error::InvalidPulses(format!(
                    "pulse {p}: span reaches past the signal end {total_samples}"
                )));
            }
            if p > 0 && s.center <= spans[p - 1].center {
                return Err(Error::InvalidPulses(format!(
                    "pulse {p}: centers not strictly increasing"
                )));
            }
            let half = (s.center - s.prev).max(s.next - s.center);
            if half > limit {
                return Err(Error::WindowTooWide { half, limit });
            }
        }
        Ok(Self {
            fft_len,
            total_samples,
            spans,
        })
    }

    pub fn spans(&self) -> &[PulseSpan] {
        &self.spans
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn total_samples(&self) -> usize {
        self.total_samples
    }

    pub fn n_pulses(&self) -> usize {
        self.spans.len()
    }

    /// Number of window-weighted accumulations one application performs.
    pub fn support_len(&self) -> usize {
        self.spans.iter().map(|s| s.support_len(self.fft_len)).sum()
    }

    fn check_fragments(&self, len: usize) -> Result<()> {
        if len != self.spans.len() * self.fft_len {
            return Err(Error::Shape(format!(
                "OLA expects {} fragment samples ({} pulses x {}), got {len}",
                self.spans.len() * self.fft_len,
                self.spans.len(),
                self.fft_len
            )));
        }
        Ok(())
    }

    /// O·x: windows each F-sample fragment around its pulse center (fragment
    /// index F/2) and sums the overlaps.
    pub fn apply(&self, fragments: &[f64]) -> Result<Vec<f64>> {
        self.check_fragments(fragments.len())?;
        let mut out = vec![0.0; self.total_samples];
        #[cfg(debug_assertions)]
        let mut ops = 0usize;
        for (span, frag) in self.spans.iter().zip(fragments.chunks_exact(self.fft_len)) {
            let offset = self.fft_len / 2;
            for n in span.support(self.fft_len) {
                out[n] += span.window(n) * frag[n + offset - span.center];
                #[cfg(debug_assertions)]
                {
                    ops += 1;
                }
            }
        }
        #[cfg(debug_assertions)]
        debug_assert_eq!(ops, self.support_len());
        Ok(out)
    }

    /// Oᵀ·g: windowed slices of the output-domain gradient.
    pub fn apply_adjoint(&self, grad_out: &[f64]) -> Result<Vec<f64>> {
        if grad_out.len() != self.total_samples {
            return Err(Error::Shape(format!(
                "OLA adjoint expects {} samples, got {}",
                self.total_samples,
                grad_out.len()
            )));
        }
        let mut out = vec![0.0; self.spans.len() * self.fft_len];
        for (span, frag) in self.spans.iter().zip(out.chunks_exact_mut(self.fft_len)) {
            let offset = self.fft_len / 2;
            for n in span.support(self.fft_len) {
                frag[n + offset - span.center] = span.window(n) * grad_out[n];
            }
        }
        Ok(out)
    }

    /// Compact payload: header plus one `(prev, center, next)` record per pulse.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(OLA_HEADER_LEN + 24 * self.spans.len());
        buf.extend_from_slice(OLA_MAGIC);
        buf.extend_from_slice(&OLA_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.spans.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.total_samples as u64).to_le_bytes());
        buf.extend_from_slice(&(self.fft_len as u32).to_le_bytes());
        for s in &self.spans {
            for v in [s.prev, s.center, s.next] {
                buf.extend_from_slice(&(v as u64).to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::OlaFormat(m.to_string());
        if bytes.len() < OLA_HEADER_LEN {
            return Err(bad("payload shorter than header"));
        }
        if &bytes[0..4] != OLA_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != OLA_VERSION {
            return Err(Error::OlaFormat(format!("unsupported version {version}")));
        }
        let n = u32_at(8) as usize;
        let total = u64_at(12) as usize;
        let fft_len = u32_at(20) as usize;
        if bytes.len() != OLA_HEADER_LEN + 24 * n {
            return Err(Error::OlaFormat(format!(
                "expected {} bytes for {n} pulses, got {}",
                OLA_HEADER_LEN + 24 * n,
                bytes.len()
            )));
        }
        let spans = (0..n)
            .map(|p| {
                let o = OLA_HEADER_LEN + 24 * p;
                PulseSpan {
                    prev: u64_at(o) as usize,
                    center: u64_at(o + 8) as usize,
                    next: u64_at(o + 16) as usize,
                }
            })
            .collect();
        Self::from_spans(spans, total, fft_len).map_err(|e| match e {
            Error::InvalidPulses(m) => Error::OlaFormat(m),
            other => other,
        })
    }
}

/// Builds O for a pulse track with fragments of length `fft_len`.
pub fn build_ola(pulses: &PulseTrack, fft_len: usize) -> Result<OlaOp> {
    OlaOp::from_centers(pulses.positions(), pulses.total_samples(), fft_len)
}
