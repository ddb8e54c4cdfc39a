//! Rendering a plane-wave map through a device dictionary.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dictionary::DeviceDictionary;
use crate::error::{Error, Result};
use crate::pwd::TimeFrequencyMap;
use crate::stft::{istft, SpectralTensor, StftConfig};

/// Background noise for the target device, either as captured spectra or as
/// a plane-wave map still to be rendered.
#[derive(Debug, Clone)]
pub enum NoiseMap {
    Spectra(SpectralTensor),
    Map(TimeFrequencyMap),
}

impl NoiseMap {
    /// Noise spectra for the target device `dict`.
    pub fn spectra(&self, dict: &DeviceDictionary) -> Result<SpectralTensor> {
        match self {
            NoiseMap::Spectra(s) => Ok(s.clone()),
            NoiseMap::Map(m) => synthesize_field(m, dict),
        }
    }
}

fn check_compatible(map: &TimeFrequencyMap, dict: &DeviceDictionary) -> Result<Vec<usize>> {
    if map.num_directions() != dict.num_directions()
        || map.grid_hash() != dict.grid().content_hash()
    {
        return Err(Error::invalid(
            "map and dictionary index different direction grids",
        ));
    }
    let (mf, df) = (map.freqs(), dict.freqs());
    if mf.fft_size != df.fft_size || mf.sample_rate != df.sample_rate {
        return Err(Error::dims(format!(
            "map uses {} points at {} Hz, dictionary {} points at {} Hz",
            mf.fft_size, mf.sample_rate, df.fft_size, df.sample_rate
        )));
    }
    map.bins()
        .iter()
        .map(|&b| {
            dict.bin_slot(b)
                .ok_or_else(|| Error::dims(format!("map bin {b} is not stored in the dictionary")))
        })
        .collect()
}

/// Spectra observed by the device of `dict` for the plane waves in `map`.
/// Cells outside the decomposed bins are zero.
pub fn synthesize_field(map: &TimeFrequencyMap, dict: &DeviceDictionary) -> Result<SpectralTensor> {
    let slots = check_compatible(map, dict)?;
    let m = dict.num_mics();
    let frames = map.frames();
    let nb = map.num_bins();
    let mut out = SpectralTensor::zeros(frames, m, map.num_samples(), *map.stft_config());
    out.data_mut()
        .par_chunks_mut(nb * m)
        .enumerate()
        .for_each(|(t, frame)| {
            for (&b, &slot) in map.bins().iter().zip(&slots) {
                let cell = &mut frame[b * m..(b + 1) * m];
                for a in map.cell(t, b) {
                    for (y, d) in cell.iter_mut().zip(dict.atom(slot, a.direction as usize)) {
                        *y += a.weight * Complex64::new(d.re as f64, d.im as f64);
                    }
                }
            }
        });
    Ok(out)
}

/// `field + gain · noise`, cell by cell.
pub fn add_noise(
    field: &SpectralTensor,
    noise: &SpectralTensor,
    gain: f64,
) -> Result<SpectralTensor> {
    if !field.same_shape(noise) {
        return Err(Error::dims(format!(
            "field is {}×{}×{}, noise {}×{}×{}",
            field.frames(),
            field.bins(),
            field.channels(),
            noise.frames(),
            noise.bins(),
            noise.channels()
        )));
    }
    if !gain.is_finite() {
        return Err(Error::invalid("noise gain must be finite"));
    }
    let mut out = field.clone();
    out.data_mut()
        .iter_mut()
        .zip(noise.data())
        .for_each(|(y, n)| *y += gain * n);
    Ok(out)
}

/// Waveforms the device of `dict` would record, optionally with noise.
pub fn render(
    map: &TimeFrequencyMap,
    dict: &DeviceDictionary,
    cfg: &StftConfig,
    noise: Option<(&NoiseMap, f64)>,
) -> Result<Vec<Vec<f64>>> {
    if cfg != map.stft_config() {
        return Err(Error::invalid(
            "STFT configuration differs from the one the map was computed with",
        ));
    }
    let mut field = synthesize_field(map, dict)?;
    if let Some((n, gain)) = noise {
        field = add_noise(&field, &n.spectra(dict)?, gain)?;
    }
    istft(&field, cfg)
}
