//! `puffin`: synthesis, verification, FLOP reports and benchmarks.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use crate::commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "puffin", version, about = "Pitch-synchronous ISTFT vocoder runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a 48 kHz WAV from a feature file.
    Synth {
        model: PathBuf,
        features: PathBuf,
        out: PathBuf,
        /// Feed frames one at a time through the incremental synthesizer.
        #[arg(long)]
        streaming: bool,
        /// Write 16-bit PCM instead of 32-bit float.
        #[arg(long)]
        pcm16: bool,
        #[arg(long)]
        json: bool,
    },
    /// Report per-layer and total MFLOPS of an architecture.
    #[command(group(ArgGroup::new("source").required(true).args(["preset", "spec", "lpcnet"])))]
    Flops {
        /// One of h1, h3, p, pl.
        #[arg(long)]
        preset: Option<String>,
        /// JSON architecture description.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Pulse rate in Hz for pulse-rate layers.
        #[arg(long, default_value_t = puffin_core::complexity::DEFAULT_PULSE_RATE)]
        pulse_rate: f64,
        /// LPCNet figure for the given first-GRU width.
        #[arg(long, value_name = "N_A")]
        lpcnet: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Compare a test WAV against a reference with spectral losses and
    /// discriminator scores.
    Verify {
        reference: PathBuf,
        test: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        skip_disc: bool,
        /// Seed for the discriminator weights.
        #[arg(long, default_value_t = 0)]
        disc_seed: u64,
    },
    /// Time synthesis of a constant-F0 utterance.
    #[command(group(ArgGroup::new("generator").args(["model", "preset"])))]
    Bench {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Randomly initialized model of preset p or pl.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
        #[arg(long, default_value_t = 131.0)]
        f0: f32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Write a randomly initialized model file.
    InitModel {
        #[arg(long, default_value = "p")]
        preset: String,
        /// Override the hidden width of the preset.
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a feature file from a 48 kHz WAV and a per-frame F0 track.
    Features {
        wav: PathBuf,
        /// Text file with one `f0 [voicing]` line per 10 ms frame.
        #[arg(long)]
        f0: PathBuf,
        out: PathBuf,
    },
}

fn init_threads() -> Result<(), CliError> {
    let threads = match std::env::var("PUFFIN_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::usage(format!("PUFFIN_THREADS must be a positive integer, got `{v}`")))?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Synth {
            model,
            features,
            out,
            streaming,
            pcm16,
            json,
        } => commands::synth(&model, &features, &out, streaming, pcm16, json),
        Command::Flops {
            preset,
            spec,
            pulse_rate,
            lpcnet,
            json,
        } => commands::flops(preset.as_deref(), spec.as_deref(), pulse_rate, lpcnet, json),
        Command::Verify {
            reference,
            test,
            json,
            skip_disc,
            disc_seed,
        } => commands::verify(&reference, &test, json, skip_disc, disc_seed),
        Command::Bench {
            model,
            preset,
            seconds,
            f0,
            seed,
            json,
        } => commands::bench(model.as_deref(), preset.as_deref(), seconds, f0, seed, json),
        Command::InitModel {
            preset,
            hidden,
            seed,
            out,
        } => commands::init_model(&preset, hidden, seed, &out),
        Command::Features { wav, f0, out } => commands::features(&wav, &f0, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
