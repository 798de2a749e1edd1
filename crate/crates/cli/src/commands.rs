//! Subcommand bodies and the mapping from library errors to exit codes.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use puffin_core::complexity::{lpcnet_flops, predicted_mflops, preset, system_flops, ArchSpec};
use puffin_core::dsp::{extract_features, l1_loss_configs, read_wav, write_wav, SampleFormat};
use puffin_core::generator::{synthesize_counted, synthesize_streaming, GeneratorModel, ModelConfig, OpCount};
use puffin_core::metrics::losses::MEL_WINDOW;
use puffin_core::metrics::{
    discriminator_forward, l1_spectral_terms, lsgan_ensemble, mean_scores, mel_l1_loss, DiscriminatorSpec,
    DiscriminatorWeights,
};
use puffin_core::types::{FeatureTrack, Waveform, SAMPLE_RATE};
use puffin_core::{pulses_from_f0, Error};
use serde_json::{json, Value};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_MODEL: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }
}

fn is_io(e: &Error) -> bool {
    matches!(e, Error::Io(_) | Error::Wav(hound::Error::IoError(_)))
}

/// Errors while reading a model file: I/O failures keep their own code.
fn model_error(path: &Path, e: Error) -> CliError {
    let code = if is_io(&e) { EXIT_IO } else { EXIT_MODEL };
    CliError::new(code, format!("{}: {e}", path.display()))
}

/// Errors while reading or interpreting user input files.
fn input_error(path: &Path, e: Error) -> CliError {
    let code = if is_io(&e) { EXIT_IO } else { EXIT_INPUT };
    CliError::new(code, format!("{}: {e}", path.display()))
}

fn write_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_IO, format!("{}: {e}", path.display()))
}

fn print_json(value: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json values always serialize")
    );
}

pub fn synth(
    model_path: &Path,
    features_path: &Path,
    out: &Path,
    streaming: bool,
    pcm16: bool,
    json: bool,
) -> Result<(), CliError> {
    let model = GeneratorModel::read(model_path).map_err(|e| model_error(model_path, e))?;
    let features = FeatureTrack::read(features_path).map_err(|e| input_error(features_path, e))?;
    features.validate().map_err(|e| input_error(features_path, e))?;

    let start = Instant::now();
    let (samples, ops, pulses) = if streaming {
        let mut samples = Vec::with_capacity(features.total_samples());
        let source = features.frames().iter().cloned().map(Ok::<_, String>);
        let report = synthesize_streaming(&model, source, |chunk| samples.extend_from_slice(chunk))
            .map_err(|e| input_error(features_path, e))?;
        (samples, report.ops, report.pulse_positions.len())
    } else {
        let mut ops = OpCount::default();
        let wave = synthesize_counted(&model, &features, &mut ops).map_err(|e| input_error(features_path, e))?;
        let pulses = pulses_from_f0(&features)
            .map_err(|e| input_error(features_path, e))?
            .len();
        (wave.samples, ops, pulses)
    };
    let elapsed = start.elapsed().as_secs_f64();
    let wave = Waveform::new(samples, SAMPLE_RATE);
    let format = if pcm16 {
        SampleFormat::Pcm16
    } else {
        SampleFormat::Float32
    };
    write_wav(out, &wave, format).map_err(|e| write_error(out, e))?;

    let report = json!({
        "mode": if streaming { "streaming" } else { "batch" },
        "frames": features.len(),
        "samples": wave.len(),
        "pulses": pulses,
        "macs": ops.macs(),
        "seconds": wave.duration_secs(),
        "elapsed_seconds": elapsed,
        "output": out.display().to_string(),
    });
    if json {
        print_json(&report);
    } else {
        println!(
            "wrote {} samples ({:.2} s, {} pulses) to {}",
            wave.len(),
            wave.duration_secs(),
            pulses,
            out.display()
        );
    }
    Ok(())
}

pub fn flops(
    preset_name: Option<&str>,
    spec_path: Option<&Path>,
    pulse_rate: f64,
    lpcnet: Option<u64>,
    json: bool,
) -> Result<(), CliError> {
    let spec = match (preset_name, spec_path) {
        (Some(_), Some(_)) => return Err(CliError::usage("--preset and --spec are mutually exclusive")),
        (Some(name), None) => Some(preset(name).map_err(|e| CliError::usage(e.to_string()))?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e.into()))?;
            Some(ArchSpec::from_json(&text).map_err(|e| input_error(path, e))?)
        }
        (None, None) => None,
    };
    let report = spec
        .map(|s| system_flops(&s, pulse_rate))
        .transpose()
        .map_err(|e| CliError::input(e.to_string()))?;
    let lpc = lpcnet.map(lpcnet_flops);

    if json {
        let mut value = json!({});
        if let Some(r) = &report {
            value["report"] = serde_json::to_value(r).expect("report serializes");
        }
        if let Some(l) = &lpc {
            value["lpcnet"] = serde_json::to_value(l).expect("lpcnet figure serializes");
        }
        print_json(&value);
        return Ok(());
    }
    if let Some(r) = &report {
        print!("{r}");
    }
    if let Some(l) = &lpc {
        let status = if l.validated {
            "published"
        } else {
            "derived from cost model, not validated"
        };
        println!("LPCNet N_A={}: {:.1} MFLOPS ({status})", l.n_a, l.mflops);
    }
    Ok(())
}

pub fn verify(reference: &Path, test: &Path, json: bool, skip_disc: bool, disc_seed: u64) -> Result<(), CliError> {
    let a = read_wav(reference).map_err(|e| input_error(reference, e))?;
    let b = read_wav(test).map_err(|e| input_error(test, e))?;
    if a.sample_rate != b.sample_rate {
        return Err(CliError::input(format!(
            "sample rates differ: {} Hz vs {} Hz",
            a.sample_rate, b.sample_rate
        )));
    }
    let n = a.len().min(b.len());
    let (x, y) = (&a.samples[..n], &b.samples[..n]);

    let (usable, skipped): (Vec<_>, Vec<_>) = l1_loss_configs().into_iter().partition(|c| c.window_length <= n);
    if usable.is_empty() {
        return Err(CliError::input(format!(
            "{n} samples is too short for any loss resolution"
        )));
    }
    let terms = l1_spectral_terms(x, y, &usable).map_err(|e| CliError::input(e.to_string()))?;
    let l1 = terms.iter().sum::<f64>() / terms.len() as f64;
    let mel = if n >= MEL_WINDOW {
        Some(mel_l1_loss(x, y).map_err(|e| CliError::input(e.to_string()))?)
    } else {
        None
    };

    let disc_spec = DiscriminatorSpec {
        sample_rate: a.sample_rate,
        ..DiscriminatorSpec::default()
    };
    let longest = disc_spec
        .submodels
        .iter()
        .map(|s| s.stft.window_length)
        .max()
        .unwrap_or(0);
    let disc = if skip_disc || n < longest {
        None
    } else {
        let weights = DiscriminatorWeights::random(&disc_spec, disc_seed);
        let real = discriminator_forward(&disc_spec, &weights, x).map_err(|e| CliError::input(e.to_string()))?;
        let fake = discriminator_forward(&disc_spec, &weights, y).map_err(|e| CliError::input(e.to_string()))?;
        let (d, g) = lsgan_ensemble(&real, &fake).map_err(|e| CliError::input(e.to_string()))?;
        Some((d, g, mean_scores(&real), mean_scores(&fake)))
    };

    let resolutions: Vec<Value> = usable
        .iter()
        .zip(&terms)
        .map(|(c, t)| json!({"window": c.window_length, "hop": c.hop, "l1": t}))
        .collect();
    let mut report = json!({
        "samples_compared": n,
        "sample_rate": a.sample_rate,
        "l1_resolutions": resolutions,
        "l1_spectral_loss": l1,
        "skipped_resolutions": skipped.iter().map(|c| c.window_length).collect::<Vec<_>>(),
        "mel_l1_loss": mel,
    });
    if let Some((d, g, real, fake)) = &disc {
        report["discriminator"] = json!({
            "seed": disc_seed,
            "d_loss": d,
            "g_loss": g,
            "mean_real_scores": real,
            "mean_test_scores": fake,
        });
    }
    if json {
        print_json(&report);
        return Ok(());
    }

    let mut text = String::new();
    let _ = writeln!(text, "compared {n} samples at {} Hz", a.sample_rate);
    if a.len() != b.len() {
        let _ = writeln!(
            text,
            "note: lengths differ ({} vs {}); compared the common prefix",
            a.len(),
            b.len()
        );
    }
    for (c, t) in usable.iter().zip(&terms) {
        let _ = writeln!(text, "l1 {:>5}/{:<5} {t:.6}", c.window_length, c.hop);
    }
    for c in &skipped {
        let _ = writeln!(text, "l1 {:>5}: skipped, signal shorter than window", c.window_length);
    }
    let _ = writeln!(text, "l1 spectral loss {l1:.6}");
    match mel {
        Some(m) => {
            let _ = writeln!(text, "mel l1 loss      {m:.6}");
        }
        None => {
            let _ = writeln!(text, "mel l1 loss      skipped, signal shorter than {MEL_WINDOW}");
        }
    }
    match &disc {
        Some((d, g, _, _)) => {
            let _ = writeln!(text, "discriminator (seed {disc_seed}) d {d:.6} g {g:.6}");
        }
        None if skip_disc => {}
        None => {
            let _ = writeln!(text, "discriminator skipped, signal shorter than {longest}");
        }
    }
    print!("{text}");
    Ok(())
}

fn load_or_init(
    model: Option<&Path>,
    preset_name: Option<&str>,
    seed: u64,
) -> Result<(GeneratorModel, String), CliError> {
    match (model, preset_name) {
        (Some(path), _) => Ok((
            GeneratorModel::read(path).map_err(|e| model_error(path, e))?,
            path.display().to_string(),
        )),
        (None, name) => {
            let name = name.unwrap_or("p");
            let config = ModelConfig::preset(name).map_err(|e| CliError::usage(e.to_string()))?;
            Ok((
                GeneratorModel::random(config, seed),
                format!("preset {name} (random weights, seed {seed})"),
            ))
        }
    }
}

pub fn bench(
    model: Option<&Path>,
    preset_name: Option<&str>,
    seconds: f64,
    f0: f32,
    seed: u64,
    json: bool,
) -> Result<(), CliError> {
    if !(seconds.is_finite() && seconds >= 0.0) {
        return Err(CliError::usage(format!(
            "--seconds must be non-negative, got {seconds}"
        )));
    }
    let (model, label) = load_or_init(model, preset_name, seed)?;
    let frames = (seconds * 100.0).round() as usize;
    let features = FeatureTrack::constant(frames, f0, true);
    features.validate().map_err(|e| CliError::input(e.to_string()))?;
    let pulses = pulses_from_f0(&features)
        .map_err(|e| CliError::input(e.to_string()))?
        .len();

    let mut ops = OpCount::default();
    let start = Instant::now();
    let wave = synthesize_counted(&model, &features, &mut ops).map_err(|e| CliError::input(e.to_string()))?;
    let elapsed = start.elapsed().as_secs_f64();
    let duration = wave.duration_secs();

    let (rtf, measured, rate, predicted) = if duration > 0.0 {
        let rate = pulses as f64 / duration;
        (
            Some(elapsed / duration),
            Some(ops.flops() as f64 / duration / 1e6),
            Some(rate),
            Some(predicted_mflops(&model, rate).map_err(|e| CliError::input(e.to_string()))?),
        )
    } else {
        (None, None, None, None)
    };
    let report = json!({
        "model": label,
        "seconds": duration,
        "f0": f0,
        "pulses": pulses,
        "elapsed_seconds": elapsed,
        "rtf": rtf,
        "macs": ops.macs(),
        "measured_mflops_per_second": measured,
        "pulse_rate": rate,
        "predicted_mflops_per_second": predicted,
    });
    if json {
        print_json(&report);
        return Ok(());
    }
    println!("model      {label}");
    println!("audio      {duration:.2} s at F0 {f0} Hz, {pulses} pulses");
    println!("macs       {}", ops.macs());
    match (rtf, measured, predicted) {
        (Some(rtf), Some(m), Some(p)) => {
            println!("rtf        {rtf:.4}");
            println!("measured   {m:.1} MFLOPS/s");
            println!("predicted  {p:.1} MFLOPS/s");
        }
        _ => println!("nothing to time"),
    }
    Ok(())
}

pub fn init_model(preset_name: &str, hidden: Option<usize>, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut config = ModelConfig::preset(preset_name).map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(h) = hidden {
        if h == 0 {
            return Err(CliError::usage("--hidden must be positive"));
        }
        config.hidden = h;
    }
    GeneratorModel::random(config, seed)
        .write(out)
        .map_err(|e| write_error(out, e))?;
    println!("wrote {} (H = {}, seed {seed})", out.display(), config.hidden);
    Ok(())
}

fn parse_f0_track(text: &str) -> Result<(Vec<f32>, Vec<f32>), String> {
    let mut f0 = Vec::new();
    let mut voicing = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let parse = |s: &str| s.parse::<f32>().map_err(|e| format!("line {}: `{s}`: {e}", i + 1));
        f0.push(parse(fields.next().unwrap_or_default())?);
        voicing.push(match fields.next() {
            Some(v) => parse(v)?,
            None => 1.0,
        });
        if fields.next().is_some() {
            return Err(format!("line {}: expected `f0 [voicing]`", i + 1));
        }
    }
    Ok((f0, voicing))
}

pub fn features(wav: &Path, f0_path: &Path, out: &Path) -> Result<(), CliError> {
    let wave = read_wav(wav).map_err(|e| input_error(wav, e))?;
    let text = std::fs::read_to_string(f0_path).map_err(|e| input_error(f0_path, e.into()))?;
    let (f0, voicing) = parse_f0_track(&text).map_err(|e| CliError::input(format!("{}: {e}", f0_path.display())))?;
    let track = extract_features(&wave, &f0, &voicing).map_err(|e| input_error(wav, e))?;
    track.validate().map_err(|e| input_error(f0_path, e))?;
    track.write(out).map_err(|e| write_error(out, e))?;
    println!("wrote {} frames to {}", track.len(), out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f0_lines() {
        let (f0, v) = parse_f0_track("# pitch\n120 1\n\n130\n0 0\n").unwrap();
        assert_eq!(f0, vec![120.0, 130.0, 0.0]);
        assert_eq!(v, vec![1.0, 1.0, 0.0]);
        assert!(parse_f0_track("abc").is_err());
        assert!(parse_f0_track("1 2 3").is_err());
    }
}
