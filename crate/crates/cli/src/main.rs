//! `dov` — data-over-voice modem command line.
//!
//! Pipelines: codebook generation and certification, bit stream
//! modulation/demodulation through WAV files, channel simulation (parametric
//! model or external codec), distortion statistics, secure-voice frame
//! encode/decode, and SER benchmark sweeps.

mod commands;
mod csvout;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dov",
    about = "Data-over-voice modem toolkit",
    version,
    args_override_self = true
)]
struct Cli {
    /// JSON config file whose entries override the given flags
    /// (keys are long flag names, e.g. {"seed": 9, "m": 64}).
    #[arg(long, global = true)]
    config: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and certify a quaternary codebook file.
    Codebook(commands::CodebookArgs),
    /// Encode a bit file into a DoV waveform (training preamble included).
    Modulate(commands::ModulateArgs),
    /// Decode a DoV waveform back into bits.
    Demodulate(commands::DemodulateArgs),
    /// Pass a waveform through a channel model or an external codec.
    Simulate(commands::SimulateArgs),
    /// Distortion and estimator statistics, CSV output.
    Stats(commands::StatsArgs),
    /// Secure-voice frame layer encode/decode.
    Frame(commands::FrameArgs),
    /// Symbol-error-rate sweep over codebook sizes.
    BenchSer(commands::BenchSerArgs),
}

fn main() -> ExitCode {
    // A config file overrides flags: re-inject its entries after the CLI
    // args so the last occurrence wins.
    let mut args: Vec<String> = std::env::args().collect();
    if let Some(pos) = args.iter().position(|a| a == "--config") {
        if let Some(path) = args.get(pos + 1).cloned() {
            match config_to_args(&path) {
                Ok(extra) => args.extend(extra),
                Err(err) => {
                    eprintln!("error: category=malformed-file: {err}");
                    return ExitCode::FAILURE;
                }
            }
        }
    }

    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Codebook(args) => commands::run_codebook(args),
        Command::Modulate(args) => commands::run_modulate(args),
        Command::Demodulate(args) => commands::run_demodulate(args),
        Command::Simulate(args) => commands::run_simulate(args),
        Command::Stats(args) => commands::run_stats(args),
        Command::Frame(args) => commands::run_frame(args),
        Command::BenchSer(args) => commands::run_bench_ser(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let category = err
                .downcast_ref::<dov_core::Error>()
                .map(|e| e.category())
                .unwrap_or("cli");
            eprintln!("error: category={category}: {err}");
            ExitCode::FAILURE
        }
    }
}

fn config_to_args(path: &str) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let object = value
        .as_object()
        .ok_or_else(|| anyhow::anyhow!("config must be a JSON object"))?;
    let mut extra = Vec::new();
    for (key, val) in object {
        match val {
            serde_json::Value::Bool(true) => extra.push(format!("--{key}")),
            serde_json::Value::Bool(false) => {}
            serde_json::Value::String(s) => {
                extra.push(format!("--{key}"));
                extra.push(s.clone());
            }
            other => {
                extra.push(format!("--{key}"));
                extra.push(other.to_string());
            }
        }
    }
    Ok(extra)
}
