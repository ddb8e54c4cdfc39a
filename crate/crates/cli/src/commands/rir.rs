use std::path::PathBuf;

use clap::{Args, Subcommand};
use wavefield_core::rir::{estimate_from_signals, DEFAULT_EPS};
use wavefield_core::{
    apply_rir, istft, load_transfer_function, read_wav, save_transfer_function, stft,
    to_impulse_response, write_wav, Result, StftConfig,
};

use super::{expect_rate, invalid, mono};

#[derive(Subcommand)]
pub enum RirCommand {
    /// Wiener-Hopf estimate from a source signal and the capture it produced.
    Estimate(EstimateArgs),
    /// Filter a source signal through a transfer function.
    Apply(ApplyArgs),
    /// Write the impulse responses of a transfer function as audio.
    Export(ExportArgs),
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Mono source signal.
    #[arg(long)]
    source: PathBuf,
    /// Capture of the source; only the samples overlapping the source are used.
    #[arg(long)]
    capture: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Analysis frame length; bounds the impulse response length.
    #[arg(long, default_value_t = 4096)]
    fft_size: usize,
    /// Regularization relative to the peak source auto-spectrum.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
}

#[derive(Args)]
pub struct ApplyArgs {
    #[arg(long)]
    rir: PathBuf,
    /// Mono source signal.
    #[arg(long)]
    source: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
pub struct ExportArgs {
    #[arg(long)]
    rir: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Samples per impulse response; the full FFT size by default.
    #[arg(long)]
    length: Option<usize>,
}

pub fn run(cmd: RirCommand) -> Result<()> {
    match cmd {
        RirCommand::Estimate(a) => {
            let source = read_wav(&a.source)?;
            let capture = read_wav(&a.capture)?;
            expect_rate(&capture, source.sample_rate, "capture")?;
            let rate = source.sample_rate;
            let x = mono(source, "source")?;
            let cfg = StftConfig::new(a.fft_size, a.fft_size / 2, rate)?;
            let tf = estimate_from_signals(&x, &capture.channels, &cfg, a.eps)?;
            let unreliable = tf.reliable().iter().filter(|r| !**r).count();
            if unreliable > 0 {
                eprintln!(
                    "warning: {unreliable} of {} bins lack source energy and were zeroed",
                    tf.bins()
                );
            }
            save_transfer_function(&tf, &a.output)
        }
        RirCommand::Apply(a) => {
            let tf = load_transfer_function(&a.rir)?;
            let source = read_wav(&a.source)?;
            expect_rate(&source, tf.sample_rate(), "source")?;
            let x = mono(source, "source")?;
            let n = tf.fft_size();
            let mut cfg = StftConfig::new(n, n / 2, tf.sample_rate())?;
            cfg.pad_edges = true;
            let y = apply_rir(&tf, &stft(&[x], &cfg)?)?;
            write_wav(&a.output, &istft(&y, &cfg)?, tf.sample_rate())
        }
        RirCommand::Export(a) => {
            let tf = load_transfer_function(&a.rir)?;
            let length = a.length.unwrap_or(tf.fft_size());
            if length == 0 {
                return Err(invalid("impulse response length must be positive"));
            }
            write_wav(
                &a.output,
                &to_impulse_response(&tf, length)?,
                tf.sample_rate(),
            )
        }
    }
}
