//! Multichannel WAV reading and writing.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

/// Deinterleaved samples with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f64>>,
}

impl Audio {
    pub fn num_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

/// Reads integer or float PCM, scaling integers to `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Audio> {
    let mut r = WavReader::open(path)?;
    let spec = r.spec();
    let n_ch = spec.channels as usize;
    let inter: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let frames = inter.len() / n_ch;
    let channels = (0..n_ch)
        .map(|c| (0..frames).map(|i| inter[i * n_ch + c]).collect())
        .collect();
    Ok(Audio {
        sample_rate: spec.sample_rate,
        channels,
    })
}

/// Writes 32-bit float PCM.
pub fn write_wav(path: impl AsRef<Path>, channels: &[Vec<f64>], sample_rate: u32) -> Result<()> {
    let n_ch = channels.len();
    if n_ch == 0 || n_ch > u16::MAX as usize {
        return Err(Error::invalid(format!("cannot write {n_ch} channels")));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("channels differ in length"));
    }
    let spec = WavSpec {
        channels: n_ch as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec)?;
    for i in 0..len {
        for c in channels {
            w.write_sample(c[i] as f32)?;
        }
    }
    w.finalize()?;
    Ok(())
}
