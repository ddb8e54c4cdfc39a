pub mod decompose;
pub mod dict;
pub mod rir;
pub mod sim;
pub mod synth;

use std::fs;
use std::path::Path;

use wavefield_core::{Audio, Error, Result};

pub fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub fn dims(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}

pub fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

/// Parses `lo:hi` in Hz.
pub fn parse_band(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI in Hz, got {s:?}"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|e| format!("bad lower edge: {e}"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|e| format!("bad upper edge: {e}"))?;
    Ok((lo, hi))
}

pub fn expect_rate(audio: &Audio, rate: u32, what: &str) -> Result<()> {
    if audio.sample_rate != rate {
        return Err(dims(format!(
            "{what} is sampled at {} Hz, expected {rate} Hz",
            audio.sample_rate
        )));
    }
    Ok(())
}

pub fn mono(audio: Audio, what: &str) -> Result<Vec<f64>> {
    if audio.channels.len() != 1 {
        return Err(dims(format!(
            "{what} has {} channels, expected 1",
            audio.channels.len()
        )));
    }
    Ok(audio.channels.into_iter().next().unwrap())
}
