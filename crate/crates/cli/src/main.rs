//! `wavefield`: build device dictionaries, decompose room captures into plane
//! waves, render them for other devices and estimate room impulse responses.

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavefield_core::Error;

mod commands;

#[derive(Parser)]
#[command(
    name = "wavefield",
    version,
    about = "Sound-field synthesis for microphone arrays on rigid devices"
)]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or inspect device dictionaries (.wfd).
    #[command(subcommand)]
    Dict(commands::dict::DictCommand),
    /// Decompose a capture into plane waves (.tfm) and report the fit.
    Decompose(commands::decompose::DecomposeArgs),
    /// Render a plane-wave map through a target dictionary.
    Synth(commands::synth::SynthArgs),
    /// Estimate, apply or export room impulse responses (.rir).
    #[command(subcommand)]
    Rir(commands::rir::RirCommand),
    /// Simulate a capture in a shoebox room with the image-source method.
    Sim(commands::sim::SimArgs),
}

fn exit_code(e: &Error) -> u8 {
    if e.is_file_error() {
        3
    } else {
        match e {
            Error::InvalidArgument(_) | Error::DimensionMismatch(_) => 2,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Dict(c) => commands::dict::run(c),
        Command::Decompose(a) => commands::decompose::run(a),
        Command::Synth(a) => commands::synth::run(a),
        Command::Rir(c) => commands::rir::run(c),
        Command::Sim(a) => commands::sim::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
