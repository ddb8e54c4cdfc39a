//! Short-time Fourier analysis and weighted overlap-add synthesis.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FrequencyGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// Periodic Hann, `0.5 - 0.5 cos(2πn/N)`.
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_size: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub sample_rate: u32,
    /// Zero-pad `frame_size - hop` samples on both ends so every input sample
    /// is covered by the full overlap of frames. Off by default, in which case
    /// frame `t` starts at sample `t·hop`.
    pub pad_edges: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_size: 1024,
            hop: 512,
            window: WindowKind::Hann,
            sample_rate: 16_000,
            pad_edges: false,
        }
    }
}

impl StftConfig {
    pub fn new(frame_size: usize, hop: usize, sample_rate: u32) -> Result<Self> {
        let cfg = Self {
            frame_size,
            hop,
            sample_rate,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_size < 2 || !self.frame_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "frame size {} must be even and at least 2",
                self.frame_size
            )));
        }
        if self.hop == 0 || !self.frame_size.is_multiple_of(self.hop) {
            return Err(Error::invalid(format!(
                "hop {} must divide frame size {}",
                self.hop, self.frame_size
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        let dev = cola_deviation(&self.window(), self.hop);
        if dev > 1e-10 {
            return Err(Error::invalid(format!(
                "window is not constant-overlap-add at hop {} (deviation {dev:e})",
                self.hop
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> Vec<f64> {
        match self.window {
            WindowKind::Hann => (0..self.frame_size)
                .map(|n| 0.5 - 0.5 * (TAU * n as f64 / self.frame_size as f64).cos())
                .collect(),
        }
    }

    pub fn num_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    fn lead(&self) -> usize {
        if self.pad_edges {
            self.frame_size - self.hop
        } else {
            0
        }
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        let lead = self.lead();
        let padded = len + 2 * lead;
        if padded < self.frame_size {
            return 0;
        }
        (padded - self.frame_size).div_ceil(self.hop) + 1
    }

    pub fn frequency_grid(&self, speed_of_sound: f64) -> Result<FrequencyGrid> {
        FrequencyGrid::with_speed_of_sound(self.sample_rate, self.frame_size, speed_of_sound)
    }
}

/// Max relative deviation of the hop-shifted window sum from its mean.
fn cola_deviation(w: &[f64], hop: usize) -> f64 {
    let sums: Vec<f64> = (0..hop)
        .map(|n| w.iter().skip(n).step_by(hop).sum())
        .collect();
    let mean = sums.iter().sum::<f64>() / hop as f64;
    sums.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max) / mean.abs().max(f64::MIN_POSITIVE)
}

/// Frames × bins × channels of complex STFT coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTensor {
    frames: usize,
    bins: usize,
    channels: usize,
    data: Vec<Complex64>,
    config: StftConfig,
    num_samples: usize,
}

impl SpectralTensor {
    pub fn zeros(frames: usize, channels: usize, num_samples: usize, config: StftConfig) -> Self {
        let bins = config.num_bins();
        Self {
            frames,
            bins,
            channels,
            data: vec![Complex64::new(0.0, 0.0); frames * bins * channels],
            config,
            num_samples,
        }
    }

    /// Tensor with the same layout as `self` but `channels` channels.
    pub fn zeros_like(&self, channels: usize) -> Self {
        Self::zeros(self.frames, channels, self.num_samples, self.config)
    }

    pub fn from_data(
        frames: usize,
        channels: usize,
        num_samples: usize,
        config: StftConfig,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        let bins = config.num_bins();
        if data.len() != frames * bins * channels {
            return Err(Error::dims(format!(
                "{} values for {frames} frames × {bins} bins × {channels} channels",
                data.len()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("spectral tensor has non-finite entries"));
        }
        Ok(Self {
            frames,
            bins,
            channels,
            data,
            config,
            num_samples,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    /// Length of the time signal this tensor was computed from.
    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn cell(&self, t: usize, f: usize) -> &[Complex64] {
        let start = (t * self.bins + f) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn cell_mut(&mut self, t: usize, f: usize) -> &mut [Complex64] {
        let start = (t * self.bins + f) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    pub fn same_shape(&self, other: &SpectralTensor) -> bool {
        self.frames == other.frames && self.bins == other.bins && self.channels == other.channels
    }

    /// Frames `lo..hi` as a tensor of their own.
    pub fn slice_frames(&self, lo: usize, hi: usize) -> Result<SpectralTensor> {
        if lo > hi || hi > self.frames {
            return Err(Error::invalid(format!(
                "frame range {lo}..{hi} outside 0..{}",
                self.frames
            )));
        }
        let stride = self.bins * self.channels;
        Ok(Self {
            frames: hi - lo,
            bins: self.bins,
            channels: self.channels,
            data: self.data[lo * stride..hi * stride].to_vec(),
            config: self.config,
            num_samples: self.num_samples,
        })
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

fn check_signal(signal: &[Vec<f64>]) -> Result<usize> {
    let first = signal
        .first()
        .ok_or_else(|| Error::invalid("signal has no channels"))?;
    let n = first.len();
    if signal.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("channels differ in length"));
    }
    if signal.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::invalid("signal has non-finite samples"));
    }
    Ok(n)
}

struct Plan {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Plan {
    fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            fwd: p.plan_fft_forward(n),
            inv: p.plan_fft_inverse(n),
        }
    }
}

/// Windowed one-sided spectra of every frame and channel.
pub fn stft(signal: &[Vec<f64>], cfg: &StftConfig) -> Result<SpectralTensor> {
    cfg.validate()?;
    let n = check_signal(signal)?;
    if n < cfg.frame_size {
        return Err(Error::invalid(format!(
            "signal of {n} samples is shorter than one {}-sample frame",
            cfg.frame_size
        )));
    }
    let frames = cfg.num_frames(n);
    let lead = cfg.lead();
    let window = cfg.window();
    let plan = Plan::new(cfg.frame_size);
    let channels = signal.len();
    let mut out = SpectralTensor::zeros(frames, channels, n, *cfg);
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.frame_size];
    for (m, x) in signal.iter().enumerate() {
        for t in 0..frames {
            let start = (t * cfg.hop) as isize - lead as isize;
            for (i, b) in buf.iter_mut().enumerate() {
                let idx = start + i as isize;
                let v = if idx >= 0 && (idx as usize) < n {
                    x[idx as usize]
                } else {
                    0.0
                };
                *b = Complex64::new(v * window[i], 0.0);
            }
            plan.fwd.process(&mut buf);
            for f in 0..out.bins {
                out.cell_mut(t, f)[m] = buf[f];
            }
        }
    }
    Ok(out)
}

/// Least-squares weighted overlap-add inverse of [`stft`].
pub fn istft(spec: &SpectralTensor, cfg: &StftConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let sc = spec.config();
    if sc.frame_size != cfg.frame_size
        || sc.hop != cfg.hop
        || sc.window != cfg.window
        || sc.pad_edges != cfg.pad_edges
    {
        return Err(Error::invalid(
            "STFT configuration does not match the spectral tensor",
        ));
    }
    let nfft = cfg.frame_size;
    let window = cfg.window();
    let plan = Plan::new(nfft);
    let total = if spec.frames == 0 {
        0
    } else {
        (spec.frames - 1) * cfg.hop + nfft
    };
    let mut norm = vec![0.0; total];
    for t in 0..spec.frames {
        for (i, w) in window.iter().enumerate() {
            norm[t * cfg.hop + i] += w * w;
        }
    }
    let lead = cfg.lead();
    let out_len = if cfg.pad_edges {
        spec.num_samples
    } else {
        total
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut out = Vec::with_capacity(spec.channels);
    for m in 0..spec.channels {
        let mut acc = vec![0.0; total];
        for t in 0..spec.frames {
            for f in 0..spec.bins {
                buf[f] = spec.cell(t, f)[m];
            }
            // DC and Nyquist of a real signal are real
            buf[0].im = 0.0;
            buf[nfft / 2].im = 0.0;
            for f in 1..nfft / 2 {
                buf[nfft - f] = buf[f].conj();
            }
            plan.inv.process(&mut buf);
            let base = t * cfg.hop;
            for (i, w) in window.iter().enumerate() {
                acc[base + i] += w * buf[i].re / nfft as f64;
            }
        }
        let y: Vec<f64> = (0..out_len)
            .map(|k| {
                let i = k + lead;
                if i < total && norm[i] > 1e-8 {
                    acc[i] / norm[i]
                } else {
                    0.0
                }
            })
            .collect();
        out.push(y);
    }
    Ok(out)
}
