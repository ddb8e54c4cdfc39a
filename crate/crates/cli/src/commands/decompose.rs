use std::path::PathBuf;

use clap::Args;
use wavefield_core::pwd::ResidualTrace;
use wavefield_core::{
    decompose_traced, goa, load_dictionary, read_wav, save_map, stft, DecompositionConfig,
    DeviceDictionary, GoaReport, Result, StftConfig,
};

use super::{dims, expect_rate, parse_band};

#[derive(Args)]
pub struct DecomposeArgs {
    /// Multichannel capture recorded by the dictionary's device.
    #[arg(long)]
    capture: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 30)]
    max_atoms: usize,
    /// Stop adding atoms once the residual is this far below the cell energy, dB.
    #[arg(long, default_value_t = -30.0, allow_negative_numbers = true)]
    stop_db: f64,
    /// Decomposed band as LO:HI in Hz.
    #[arg(long, value_parser = parse_band, default_value = "50:8000")]
    bins: (f64, f64),
    /// STFT hop; half the dictionary FFT size by default.
    #[arg(long)]
    hop: Option<usize>,
    /// Start frames at sample 0 instead of zero-padding half a frame at
    /// both ends; the capture must then span at least one frame.
    #[arg(long)]
    no_pad: bool,
    /// Also print GoA for every atom budget from 1 to --max-atoms.
    #[arg(long)]
    k_sweep: bool,
}

/// Capture STFT compatible with `dict`.
fn capture_stft_config(
    dict: &DeviceDictionary,
    hop: Option<usize>,
    pad: bool,
) -> Result<StftConfig> {
    let f = dict.freqs();
    let mut cfg = StftConfig::new(f.fft_size, hop.unwrap_or(f.fft_size / 2), f.sample_rate)?;
    cfg.pad_edges = pad;
    Ok(cfg)
}

pub fn run(a: DecomposeArgs) -> Result<()> {
    let cfg = DecompositionConfig {
        max_atoms: a.max_atoms,
        residual_stop_db: a.stop_db,
        bin_range: a.bins,
        ..DecompositionConfig::default()
    };
    cfg.validate()?;
    let dict = load_dictionary(&a.dict)?;
    let capture = read_wav(&a.capture)?;
    expect_rate(&capture, dict.freqs().sample_rate, "capture")?;
    if capture.channels.len() != dict.num_mics() {
        return Err(dims(format!(
            "capture has {} channels, dictionary has {} microphones",
            capture.channels.len(),
            dict.num_mics()
        )));
    }
    let stft_cfg = capture_stft_config(&dict, a.hop, !a.no_pad)?;
    let spec = stft(&capture.channels, &stft_cfg)?;
    let (map, trace) = decompose_traced(&spec, &dict, &cfg)?;
    let report = goa(&map, &dict, &spec)?;
    save_map(&map, &a.output)?;
    print_report(&report, &dict, a.bins);
    if a.k_sweep {
        print_sweep(&trace, a.max_atoms)?;
    }
    Ok(())
}

fn print_report(report: &GoaReport, dict: &DeviceDictionary, (lo, hi): (f64, f64)) {
    const BAND_HZ: f64 = 1000.0;
    println!("{:>16}  {:>9}", "band_hz", "goa_db");
    let mut edge = (lo / BAND_HZ).floor() * BAND_HZ;
    while edge < hi {
        let (b_lo, b_hi) = (edge.max(lo), (edge + BAND_HZ).min(hi));
        // bands without energy are left out
        if let Ok(db) = report.band(dict.freqs(), b_lo, b_hi) {
            println!("{:>16}  {db:>9.2}", format!("{b_lo:.0}-{b_hi:.0}"));
        }
        edge += BAND_HZ;
    }
    println!("{:>16}  {:>9.2}", "aggregate", report.aggregate_db);
}

fn print_sweep(trace: &ResidualTrace, max_atoms: usize) -> Result<()> {
    println!();
    println!("{:>4}  {:>9}", "K", "goa_db");
    for k in 1..=max_atoms {
        println!("{k:>4}  {:>9.2}", trace.goa_at(k)?.aggregate_db);
    }
    Ok(())
}
