//! Arithmetic cost of convolutional vocoders, in MFLOPS per second of audio.
//!
//! Every layer costs `2 * i * o * k * l * d * rate`: one multiply and one add
//! per retained weight per activation, `l` convolutions per residual block,
//! density `d` for sparse layers. Biases, activations, inverse FFTs and
//! overlap-add are not counted.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorModel;
use crate::types::{FRAME_SHIFT, SAMPLE_RATE};

/// Mean pulse rate assumed when none is given.
pub const DEFAULT_PULSE_RATE: f64 = 131.0;

/// Preset names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 4] = ["h1", "h3", "p", "pl"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    #[serde(alias = "upsample-conv", alias = "upsa")]
    Upsample,
    #[serde(alias = "residual-block", alias = "resi")]
    Residual,
}

impl LayerKind {
    fn label(self) -> &'static str {
        match self {
            Self::Conv => "Conv",
            Self::Upsample => "Upsa",
            Self::Residual => "Resi",
        }
    }
}

/// Operating rate of a layer: fixed, or tied to the glottal pulse rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rate {
    Hz(f64),
    Symbolic(SymbolicRate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolicRate {
    Pulse,
}

impl Rate {
    pub const PULSE: Rate = Rate::Symbolic(SymbolicRate::Pulse);

    pub fn resolve(self, pulse_rate: f64) -> f64 {
        match self {
            Rate::Hz(hz) => hz,
            Rate::Symbolic(SymbolicRate::Pulse) => pulse_rate,
        }
    }

    pub fn is_pulse(self) -> bool {
        matches!(self, Rate::Symbolic(_))
    }
}

fn one() -> u64 {
    1
}

fn full() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub kind: LayerKind,
    pub i: u64,
    pub o: u64,
    pub k: u64,
    #[serde(default = "one")]
    pub l: u64,
    #[serde(default = "full")]
    pub d: f64,
    pub rate: Rate,
}

impl LayerRecord {
    pub fn new(kind: LayerKind, i: u64, o: u64, k: u64, rate: Rate) -> Self {
        Self {
            kind,
            i,
            o,
            k,
            l: 1,
            d: 1.0,
            rate,
        }
    }

    pub fn blocks(mut self, l: u64) -> Self {
        self.l = l;
        self
    }

    pub fn density(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.i == 0 || self.o == 0 || self.k == 0 || self.l == 0 {
            return Err(Error::Config(format!("layer counts must be positive: {self:?}")));
        }
        if !(self.d > 0.0 && self.d <= 1.0) {
            return Err(Error::Config(format!("density {} outside (0, 1]", self.d)));
        }
        if let Rate::Hz(hz) = self.rate {
            if !(hz.is_finite() && hz >= 0.0) {
                return Err(Error::Config(format!("rate {hz} is not a finite non-negative number")));
            }
        }
        Ok(())
    }
}

/// `2 * i * o * k * l * d * rate / 1e6` for a record at a concrete rate.
pub fn layer_flops(rec: &LayerRecord, pulse_rate: f64) -> f64 {
    let weights = (rec.i * rec.o * rec.k * rec.l) as f64 * rec.d;
    2.0 * weights * rec.rate.resolve(pulse_rate) / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub name: String,
    pub layers: Vec<LayerRecord>,
    /// Note printed under the report table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footnote: Option<String>,
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config(format!("architecture `{}` has no layers", self.name)));
        }
        self.layers.iter().try_for_each(LayerRecord::validate)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub kind: LayerKind,
    pub i: u64,
    pub o: u64,
    pub k: u64,
    pub l: u64,
    pub d: f64,
    pub rate_hz: f64,
    pub pulse_rate: bool,
    pub mflops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopReport {
    pub name: String,
    pub pulse_rate: f64,
    pub rows: Vec<ReportRow>,
    pub total_mflops: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub footnote: Option<String>,
}

pub fn system_flops(spec: &ArchSpec, pulse_rate: f64) -> Result<FlopReport> {
    spec.validate()?;
    if !(pulse_rate.is_finite() && pulse_rate >= 0.0) {
        return Err(Error::Config(format!(
            "pulse rate {pulse_rate} must be finite and non-negative"
        )));
    }
    let rows: Vec<ReportRow> = spec
        .layers
        .iter()
        .map(|rec| ReportRow {
            kind: rec.kind,
            i: rec.i,
            o: rec.o,
            k: rec.k,
            l: rec.l,
            d: rec.d,
            rate_hz: rec.rate.resolve(pulse_rate),
            pulse_rate: rec.rate.is_pulse(),
            mflops: layer_flops(rec, pulse_rate),
        })
        .collect();
    let total_mflops = rows.iter().map(|r| r.mflops).sum();
    Ok(FlopReport {
        name: spec.name.clone(),
        pulse_rate,
        rows,
        total_mflops,
        footnote: spec.footnote.clone(),
    })
}

impl fmt::Display for FlopReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let residual = self.rows.iter().any(|r| r.kind == LayerKind::Residual);
        let col5 = if residual { "l" } else { "d" };
        writeln!(f, "{}", self.name)?;
        writeln!(
            f,
            "{:<6}{:>6}{:>7}{:>5}{:>6}{:>11}{:>11}",
            "", "i", "o", "k", col5, "rate (hz)", "MFLOPS"
        )?;
        for r in &self.rows {
            let c5 = if residual {
                if r.kind == LayerKind::Residual {
                    r.l.to_string()
                } else {
                    "-".to_string()
                }
            } else {
                format!("{:.1}", r.d)
            };
            writeln!(
                f,
                "{:<6}{:>6}{:>7}{:>5}{:>6}{:>11}{:>11.1}",
                r.kind.label(),
                r.i,
                r.o,
                r.k,
                c5,
                format_rate(r.rate_hz),
                r.mflops
            )?;
        }
        writeln!(f, "{:<6}{:>46.1}", "total", self.total_mflops)?;
        if let Some(note) = &self.footnote {
            writeln!(f, "note: {note}")?;
        }
        Ok(())
    }
}

fn format_rate(hz: f64) -> String {
    if hz.fract() == 0.0 {
        format!("{hz:.0}")
    } else {
        format!("{hz:.1}")
    }
}

fn hifigan(name: &str, first: u64, up_k: [u64; 4], res_k: [u64; 3], l: u64) -> ArchSpec {
    use LayerKind::*;
    // the sample rates HiFi-GAN runs at after each upsampling stage, at 22.05 kHz output
    let rates = [86.0, 689.0, 5512.0, 11025.0, 22050.0];
    let mut layers = vec![LayerRecord::new(Conv, 80, first, 7, Rate::Hz(rates[0]))];
    let mut ch = first;
    let n_up = if up_k[3] == 0 { 3 } else { 4 };
    let mut stage_rate = 0;
    for (s, &k) in up_k.iter().take(n_up).enumerate() {
        layers.push(LayerRecord::new(Upsample, ch, ch / 2, k, Rate::Hz(rates[stage_rate])));
        ch /= 2;
        // v3 skips from 5512 Hz straight to 22050 Hz
        stage_rate = if n_up == 3 && s == 2 { 4 } else { stage_rate + 1 };
        for &rk in &res_k {
            layers.push(LayerRecord::new(Residual, ch, ch, rk, Rate::Hz(rates[stage_rate])).blocks(l));
        }
    }
    layers.push(LayerRecord::new(Conv, ch, 1, 7, Rate::Hz(rates[4])));
    ArchSpec {
        name: name.to_string(),
        layers,
        footnote: None,
    }
}

fn puffin(name: &str, hidden: u64, out: u64, density: f64) -> ArchSpec {
    use LayerKind::Conv;
    let frame = Rate::Hz(f64::from(SAMPLE_RATE) / FRAME_SHIFT as f64);
    let mut layers = vec![LayerRecord::new(Conv, 32, hidden, 3, frame)];
    layers.extend((0..3).map(|_| LayerRecord::new(Conv, hidden, hidden, 3, frame)));
    layers.push(LayerRecord::new(Conv, hidden, hidden, 3, Rate::PULSE));
    layers.push(LayerRecord::new(Conv, hidden, out, 1, Rate::PULSE).density(density));
    ArchSpec {
        name: name.to_string(),
        layers,
        footnote: None,
    }
}

const PROJECTION_NOTE: &str = "final layer counted with o = 2064; the runtime projection has \
     2050 channels (two halves of F/2 + 1 = 1025 bins)";

/// Built-in architectures: HiFi-GAN v1 and v3, and the standard and large
/// pulse-synchronous generators.
pub fn preset(name: &str) -> Result<ArchSpec> {
    let mut spec = match name.to_ascii_lowercase().as_str() {
        "h1" => hifigan("H1: HiFi-GAN v1", 512, [16, 16, 4, 4], [3, 7, 11], 6),
        "h3" => hifigan("H3: HiFi-GAN v3", 256, [16, 16, 8, 0], [3, 5, 7], 2),
        "p" => puffin("P: Puffin standard", 256, 2064, 0.1),
        "pl" => puffin("PL: Puffin large", 1024, 2064, 1.0),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    if name.eq_ignore_ascii_case("p") || name.eq_ignore_ascii_case("pl") {
        spec.footnote = Some(PROJECTION_NOTE.to_string());
    }
    Ok(spec)
}

/// The cost model of a concrete generator: its real widths and the exact
/// retained fraction of the projection.
pub fn model_arch(model: &GeneratorModel) -> ArchSpec {
    let h = model.hidden() as u64;
    let proj = model.projection();
    let density = proj.macs_per_row() as f64 / (proj.in_ch() * proj.out_ch()) as f64;
    let mut spec = puffin("generator model", h, model.out_channels() as u64, 1.0);
    if let Some(last) = spec.layers.last_mut() {
        last.d = density;
    }
    spec
}

/// Predicted MFLOPS of `model` at `pulse_rate`.
pub fn predicted_mflops(model: &GeneratorModel, pulse_rate: f64) -> Result<f64> {
    Ok(system_flops(&model_arch(model), pulse_rate)?.total_mflops)
}

/// LPCNet reference figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpcnetFlops {
    pub n_a: u64,
    pub mflops: f64,
    /// Whether `mflops` is a published figure rather than a formula value.
    pub validated: bool,
    /// Value of the cost model for this width.
    pub formula_mflops: f64,
}

/// Published totals for the two first-GRU widths that were reported.
const LPCNET_PUBLISHED: [(u64, f64); 2] = [(384, 2292.0), (256, 1332.0)];

/// Sample-rate cost: `(3 d N_A^2 + 3 N_B (N_A + N_B) + 2 N_B Q) * 2 Fs`,
/// with `d = 0.1`, `N_B = 16`, `Q = 256`, `Fs = 16 kHz`; plus a frame-rate
/// network of two 3-tap 128-wide convolutions and two 128-wide dense layers
/// at 100 Hz.
pub fn lpcnet_formula_mflops(n_a: u64) -> f64 {
    let (d, n_b, q, fs) = (0.1, 16.0, 256.0, 16_000.0);
    let n_a = n_a as f64;
    let sample = (3.0 * d * n_a * n_a + 3.0 * n_b * (n_a + n_b) + 2.0 * n_b * q) * 2.0 * fs;
    let frame = 2.0 * 100.0 * (3.0 * 84.0 * 128.0 + 3.0 * 128.0 * 128.0 + 2.0 * 128.0 * 128.0);
    (sample + frame) / 1e6
}

pub fn lpcnet_flops(n_a: u64) -> LpcnetFlops {
    let formula_mflops = lpcnet_formula_mflops(n_a);
    match LPCNET_PUBLISHED.iter().find(|(w, _)| *w == n_a) {
        Some(&(_, mflops)) => LpcnetFlops {
            n_a,
            mflops,
            validated: true,
            formula_mflops,
        },
        None => LpcnetFlops {
            n_a,
            mflops: formula_mflops,
            validated: false,
            formula_mflops,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rows() {
        let conv = LayerRecord::new(LayerKind::Conv, 80, 512, 7, Rate::Hz(86.0));
        assert!((layer_flops(&conv, 0.0) - 49.3).abs() < 0.05);
        let proj = LayerRecord::new(LayerKind::Conv, 256, 2064, 1, Rate::PULSE).density(0.1);
        assert!((layer_flops(&proj, 131.0) - 13.8).abs() < 0.05);
        let idle = LayerRecord::new(LayerKind::Conv, 80, 512, 7, Rate::Hz(0.0));
        assert_eq!(layer_flops(&idle, 131.0), 0.0);
    }

    #[test]
    fn preset_layer_counts() {
        assert_eq!(preset("h1").unwrap().layers.len(), 18);
        assert_eq!(preset("h3").unwrap().layers.len(), 14);
        assert_eq!(preset("P").unwrap().layers.len(), 6);
        assert!(matches!(preset("x"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{"name": "toy", "layers": [
            {"kind": "conv", "i": 2, "o": 3, "k": 5, "rate": 100},
            {"kind": "residual-block", "i": 3, "o": 3, "k": 3, "l": 2, "rate": "pulse"},
            {"kind": "upsa", "i": 3, "o": 1, "k": 1, "d": 0.5, "rate": 10.5}
        ]}"#;
        let spec = ArchSpec::from_json(text).unwrap();
        assert_eq!(spec.layers[0].l, 1);
        assert_eq!(spec.layers[0].d, 1.0);
        assert!(spec.layers[1].rate.is_pulse());
        assert_eq!(spec.layers[2].kind, LayerKind::Upsample);
        assert_eq!(ArchSpec::from_json(&spec.to_json().unwrap()).unwrap(), spec);
        let report = system_flops(&spec, 200.0).unwrap();
        let expect = (2.0 * 30.0 * 100.0 + 2.0 * 54.0 * 200.0 + 2.0 * 1.5 * 10.5) / 1e6;
        assert!((report.total_mflops - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_records() {
        let bad = r#"{"name": "x", "layers": [{"kind": "conv", "i": 0, "o": 3, "k": 5, "rate": 1}]}"#;
        assert!(ArchSpec::from_json(bad).is_err());
        let bad = r#"{"name": "x", "layers": [{"kind": "conv", "i": 1, "o": 3, "k": 5, "d": 1.5, "rate": 1}]}"#;
        assert!(ArchSpec::from_json(bad).is_err());
        let bad = r#"{"name": "x", "layers": [{"kind": "conv", "i": 1, "o": 3, "k": 5, "rate": "frame"}]}"#;
        assert!(ArchSpec::from_json(bad).is_err());
    }

    #[test]
    fn lpcnet_figures() {
        assert_eq!(lpcnet_flops(384).mflops, 2292.0);
        assert_eq!(lpcnet_flops(256).mflops, 1332.0);
        assert!(lpcnet_flops(256).validated);
        let zero = lpcnet_flops(0);
        assert!(!zero.validated && zero.mflops > 0.0);
        assert!((lpcnet_flops(256).formula_mflops - 1331.9).abs() < 0.1);
    }

    #[test]
    fn table_renders() {
        let text = system_flops(&preset("p").unwrap(), 131.0).unwrap().to_string();
        assert!(text.contains("188.2"));
        assert!(text.contains("2064"));
        assert!(text.contains("note:"));
    }
}
