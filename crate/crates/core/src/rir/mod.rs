//! Multichannel transfer-function estimation from source and capture spectra.

mod io;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::stft::{SpectralTensor, StftConfig};

pub use io::{
    load_transfer_function, read_transfer_function, save_transfer_function, write_transfer_function,
};

/// Default regularization, relative to the peak source auto-spectrum.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Bins whose source auto-spectrum is below this fraction of the peak are
/// treated as unexcited.
pub const RELIABLE_FLOOR: f64 = 1e-12;

/// Analysis used for estimation by default. Frames much longer than the
/// responses being identified keep the Welch window bias small.
pub fn estimation_stft_config(sample_rate: u32) -> Result<StftConfig> {
    StftConfig::new(4096, 2048, sample_rate)
}

/// Welch auto- and cross-spectra of a source `x` and an `M`-channel capture `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectra {
    config: StftConfig,
    channels: usize,
    frames: usize,
    sxx: Vec<f64>,
    sxy: Vec<Complex64>,
}

impl CrossSpectra {
    pub fn new(config: StftConfig, channels: usize) -> Result<Self> {
        config.validate()?;
        if channels == 0 {
            return Err(Error::invalid("at least one capture channel is required"));
        }
        let bins = config.num_bins();
        Ok(Self {
            config,
            channels,
            frames: 0,
            sxx: vec![0.0; bins],
            sxy: vec![Complex64::new(0.0, 0.0); bins * channels],
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.sxx.len()
    }

    pub fn frame_count(&self) -> usize {
        self.frames
    }

    /// Mean of `|x|²` per bin.
    pub fn sxx(&self) -> Vec<f64> {
        let n = self.frames.max(1) as f64;
        self.sxx.iter().map(|v| v / n).collect()
    }

    /// Mean of `x*·y`, `[bin][channel]`.
    pub fn sxy(&self) -> Vec<Complex64> {
        let n = self.frames.max(1) as f64;
        self.sxy.iter().map(|v| v / n).collect()
    }

    /// Adds every frame of a 1-channel source and `M`-channel capture.
    pub fn accumulate(&mut self, x: &SpectralTensor, y: &SpectralTensor) -> Result<()> {
        if x.channels() != 1 {
            return Err(Error::dims(format!(
                "source has {} channels, expected 1",
                x.channels()
            )));
        }
        if y.channels() != self.channels {
            return Err(Error::dims(format!(
                "capture has {} channels, accumulator {}",
                y.channels(),
                self.channels
            )));
        }
        if x.frames() != y.frames() {
            return Err(Error::dims(format!(
                "source has {} frames, capture {}",
                x.frames(),
                y.frames()
            )));
        }
        for s in [x, y] {
            let c = s.config();
            if c.frame_size != self.config.frame_size || c.sample_rate != self.config.sample_rate {
                return Err(Error::dims(
                    "spectra were computed with a different frame size or sample rate",
                ));
            }
        }
        let m = self.channels;
        for t in 0..x.frames() {
            for f in 0..self.sxx.len() {
                let xc = x.cell(t, f)[0];
                self.sxx[f] += xc.norm_sqr();
                let xs = xc.conj();
                for (acc, yv) in self.sxy[f * m..(f + 1) * m].iter_mut().zip(y.cell(t, f)) {
                    *acc += xs * yv;
                }
            }
        }
        self.frames += x.frames();
        Ok(())
    }

    /// Combines two accumulations, as if all their frames had been added to one.
    pub fn merge(&mut self, other: &CrossSpectra) -> Result<()> {
        if other.config.frame_size != self.config.frame_size
            || other.config.sample_rate != self.config.sample_rate
            || other.channels != self.channels
        {
            return Err(Error::dims("cannot merge spectra of different shape"));
        }
        self.sxx
            .iter_mut()
            .zip(&other.sxx)
            .for_each(|(a, b)| *a += b);
        self.sxy
            .iter_mut()
            .zip(&other.sxy)
            .for_each(|(a, b)| *a += b);
        self.frames += other.frames;
        Ok(())
    }
}

/// Estimated response `ĥ(ω)` of every capture channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    fft_size: usize,
    sample_rate: u32,
    channels: usize,
    /// `[bin][channel]`
    h: Vec<Complex64>,
    reliable: Vec<bool>,
}

impl TransferFunction {
    pub fn new(
        fft_size: usize,
        sample_rate: u32,
        channels: usize,
        h: Vec<Complex64>,
        reliable: Vec<bool>,
    ) -> Result<Self> {
        if fft_size < 2 || !fft_size.is_multiple_of(2) || channels == 0 || sample_rate == 0 {
            return Err(Error::invalid("bad transfer function parameters"));
        }
        let bins = fft_size / 2 + 1;
        if h.len() != bins * channels || reliable.len() != bins {
            return Err(Error::dims(format!(
                "{} responses and {} flags for {bins} bins × {channels} channels",
                h.len(),
                reliable.len()
            )));
        }
        if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("transfer function has non-finite entries"));
        }
        Ok(Self {
            fft_size,
            sample_rate,
            channels,
            h,
            reliable,
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.reliable.len()
    }

    /// Response of every channel at bin `f`.
    pub fn at(&self, f: usize) -> &[Complex64] {
        &self.h[f * self.channels..(f + 1) * self.channels]
    }

    pub fn is_reliable(&self, f: usize) -> bool {
        self.reliable[f]
    }

    pub fn reliable(&self) -> &[bool] {
        &self.reliable
    }

    pub fn data(&self) -> &[Complex64] {
        &self.h
    }
}

/// Regularized Wiener-Hopf division `S_xy / (S_xx + eps · max S_xx)`.
pub fn estimate_rir(cross: &CrossSpectra, eps: f64) -> Result<TransferFunction> {
    if cross.frames == 0 {
        return Err(Error::invalid("no frames accumulated"));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::invalid(format!(
            "regularization {eps} must be finite and non-negative"
        )));
    }
    let sxx = cross.sxx();
    let sxy = cross.sxy();
    let peak = sxx.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::NoExcitation);
    }
    let m = cross.channels;
    let reliable: Vec<bool> = sxx.iter().map(|&s| s >= RELIABLE_FLOOR * peak).collect();
    let mut h = vec![Complex64::new(0.0, 0.0); sxy.len()];
    h.par_chunks_mut(m).enumerate().for_each(|(f, out)| {
        if reliable[f] {
            let den = sxx[f] + eps * peak;
            for (o, s) in out.iter_mut().zip(&sxy[f * m..(f + 1) * m]) {
                *o = s / den;
            }
        }
    });
    TransferFunction::new(
        cross.config.frame_size,
        cross.config.sample_rate,
        m,
        h,
        reliable,
    )
}

/// Multiplies each source cell by `ĥ`, giving `M` output channels.
pub fn apply_rir(tf: &TransferFunction, u: &SpectralTensor) -> Result<SpectralTensor> {
    if u.channels() != 1 {
        return Err(Error::dims(format!(
            "source has {} channels, expected 1",
            u.channels()
        )));
    }
    if u.config().frame_size != tf.fft_size || u.bins() != tf.bins() {
        return Err(Error::dims(format!(
            "source uses {}-point frames, transfer function {}",
            u.config().frame_size,
            tf.fft_size
        )));
    }
    let m = tf.channels;
    let mut out = u.zeros_like(m);
    let bins = tf.bins();
    out.data_mut()
        .par_chunks_mut(bins * m)
        .enumerate()
        .for_each(|(t, frame)| {
            for f in 0..bins {
                let uv = u.cell(t, f)[0];
                for (o, h) in frame[f * m..(f + 1) * m].iter_mut().zip(tf.at(f)) {
                    *o = h * uv;
                }
            }
        });
    Ok(out)
}

/// First `length` samples of the inverse transform of every channel.
pub fn to_impulse_response(tf: &TransferFunction, length: usize) -> Result<Vec<Vec<f64>>> {
    let n = tf.fft_size;
    if length > n {
        return Err(Error::invalid(format!(
            "impulse response length {length} exceeds the FFT size {n}"
        )));
    }
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(tf.channels);
    for c in 0..tf.channels {
        for f in 0..=n / 2 {
            buf[f] = if tf.reliable[f] {
                tf.at(f)[c]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        buf[0].im = 0.0;
        buf[n / 2].im = 0.0;
        for f in 1..n / 2 {
            buf[n - f] = buf[f].conj();
        }
        ifft.process(&mut buf);
        out.push(buf[..length].iter().map(|v| v.re / n as f64).collect());
    }
    Ok(out)
}

/// Convenience wrapper: estimate from waveforms with the given analysis.
pub fn estimate_from_signals(
    source: &[f64],
    capture: &[Vec<f64>],
    cfg: &StftConfig,
    eps: f64,
) -> Result<TransferFunction> {
    let n = source
        .len()
        .min(capture.iter().map(Vec::len).min().unwrap_or(0));
    let x = crate::stft::stft(&[source[..n].to_vec()], cfg)?;
    let y = crate::stft::stft(
        &capture.iter().map(|c| c[..n].to_vec()).collect::<Vec<_>>(),
        cfg,
    )?;
    let mut cross = CrossSpectra::new(*cfg, capture.len())?;
    cross.accumulate(&x, &y)?;
    estimate_rir(&cross, eps)
}
