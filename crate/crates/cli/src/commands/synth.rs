use std::path::PathBuf;

use clap::Args;
use wavefield_core::{
    load_dictionary, load_map, read_wav, render, stft, write_wav, NoiseMap, Result,
};

use super::{dims, expect_rate, invalid};

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    map: PathBuf,
    /// Dictionary of the target device.
    #[arg(long)]
    dict: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Background noise for the target device: a capture (.wav) or a
    /// plane-wave map (.tfm).
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Linear gain applied to the noise.
    #[arg(
        long,
        default_value_t = 1.0,
        requires = "noise",
        allow_negative_numbers = true
    )]
    noise_gain: f64,
}

pub fn run(a: SynthArgs) -> Result<()> {
    let map = load_map(&a.map)?;
    let dict = load_dictionary(&a.dict)?;
    let cfg = *map.stft_config();
    if !a.noise_gain.is_finite() {
        return Err(invalid("noise gain must be finite"));
    }
    let noise = match &a.noise {
        None => None,
        Some(p) if p.extension().is_some_and(|e| e == "tfm") => Some(NoiseMap::Map(load_map(p)?)),
        Some(p) => {
            let audio = read_wav(p)?;
            expect_rate(&audio, cfg.sample_rate, "noise")?;
            if audio.channels.len() != dict.num_mics() {
                return Err(dims(format!(
                    "noise has {} channels, target device has {} microphones",
                    audio.channels.len(),
                    dict.num_mics()
                )));
            }
            let n = map.num_samples();
            if audio.num_samples() < n {
                return Err(dims(format!(
                    "noise has {} samples, the map covers {n}",
                    audio.num_samples()
                )));
            }
            let trimmed: Vec<Vec<f64>> = audio.channels.iter().map(|c| c[..n].to_vec()).collect();
            Some(NoiseMap::Spectra(stft(&trimmed, &cfg)?))
        }
    };
    let out = render(&map, &dict, &cfg, noise.as_ref().map(|n| (n, a.noise_gain)))?;
    write_wav(&a.output, &out, cfg.sample_rate)
}
