//! Shoebox image-source simulation and dictionary-exact synthetic scenes,
//! used as reference data for the rest of the pipeline.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dictionary::{DeviceDictionary, DirectionGrid, SphereSpec};
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, sub, ArrayGeometry, Direction, Vec3, DEFAULT_SPEED_OF_SOUND};
use crate::pwd::{exact_recovery_coefficient, AtomMatrix};
use crate::sphere::{RigidSphereModes, MAX_KA};
use crate::stft::{SpectralTensor, StftConfig};

/// Taps of the fractional-delay interpolator.
pub const FRACTIONAL_TAPS: usize = 32;

/// Closest an image may come to a microphone.
const MIN_DISTANCE: f64 = 1e-3;

fn default_c() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

/// A rectangular room with one source and a receiver reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: Vec3,
    /// Pressure reflection coefficients of the walls at
    /// `x = 0, x = Lx, y = 0, y = Ly, z = 0, z = Lz`.
    pub reflection: [f64; 6],
    pub max_order: usize,
    pub source_pos: Vec3,
    pub receiver_origin: Vec3,
    pub sample_rate: u32,
    #[serde(default = "default_c")]
    pub speed_of_sound: f64,
}

fn strictly_inside(p: &Vec3, dims: &Vec3) -> bool {
    (0..3).all(|i| p[i] > 0.0 && p[i] < dims[i])
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::invalid("room dimensions must be positive"));
        }
        if self.reflection.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::invalid("reflection coefficients must lie in [0, 1]"));
        }
        if !strictly_inside(&self.source_pos, &self.dimensions) {
            return Err(Error::invalid("source lies outside the room"));
        }
        if !strictly_inside(&self.receiver_origin, &self.dimensions) {
            return Err(Error::invalid("receiver lies outside the room"));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::invalid("speed of sound must be positive"));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        r.validate()?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Vec3,
    pub amplitude: f64,
    pub order: usize,
}

/// Every image of reflection order up to `room.max_order`, the source first.
pub fn image_sources(room: &RoomSpec) -> Result<Vec<ImageSource>> {
    room.validate()?;
    let n_max = room.max_order as i64;
    // per axis: (coordinate, reflection factor, order) for each lattice index
    let axis = |i: usize| -> Vec<(f64, f64, usize)> {
        let (l, s) = (room.dimensions[i], room.source_pos[i]);
        let (b_lo, b_hi) = (room.reflection[2 * i], room.reflection[2 * i + 1]);
        let mut v = Vec::new();
        for n in -n_max..=n_max {
            for p in 0..2i64 {
                let lo = (n - p).unsigned_abs() as usize;
                let hi = n.unsigned_abs() as usize;
                if lo + hi > room.max_order {
                    continue;
                }
                let coord = (1 - 2 * p) as f64 * s + 2.0 * n as f64 * l;
                v.push((coord, b_lo.powi(lo as i32) * b_hi.powi(hi as i32), lo + hi));
            }
        }
        v
    };
    let (ax, ay, az) = (axis(0), axis(1), axis(2));
    let mut out = Vec::new();
    for x in &ax {
        for y in &ay {
            if x.2 + y.2 > room.max_order {
                continue;
            }
            for z in &az {
                let order = x.2 + y.2 + z.2;
                if order <= room.max_order {
                    out.push(ImageSource {
                        position: [x.0, y.0, z.0],
                        amplitude: x.1 * y.1 * z.1,
                        order,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| {
        a.order.cmp(&b.order).then_with(|| {
            a.position
                .partial_cmp(&b.position)
                .expect("image positions are finite")
        })
    });
    Ok(out)
}

/// Hann-windowed sinc taps for a delay of `frac ∈ [0, 1)` samples, centred
/// so that tap `k` applies at offset `k - 15`, normalized to unit DC gain.
fn fractional_taps(frac: f64) -> [f64; FRACTIONAL_TAPS] {
    let half = (FRACTIONAL_TAPS / 2 - 1) as f64;
    let mut h = [0.0; FRACTIONAL_TAPS];
    for (k, v) in h.iter_mut().enumerate() {
        let x = k as f64 - half - frac;
        let sinc = if x == 0.0 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        };
        let w = 0.5 + 0.5 * (TAU * x / (FRACTIONAL_TAPS as f64 + 1.0)).cos();
        *v = sinc * w;
    }
    let s: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= s);
    h
}

fn mic_positions(room: &RoomSpec, geom: &ArrayGeometry) -> Vec<Vec3> {
    geom.positions()
        .iter()
        .map(|p| [0, 1, 2].map(|i| p[i] + room.receiver_origin[i]))
        .collect()
}

fn fft_convolve(x: &[f64], h: &[f64], len: usize) -> Vec<f64> {
    let n = (x.len() + h.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| -> Vec<Complex64> {
        let mut b: Vec<Complex64> = v.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        b.resize(n, Complex64::new(0.0, 0.0));
        b
    };
    let (mut a, mut b) = (pad(x), pad(h));
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(p, q)| *p *= q);
    inv.process(&mut a);
    a[..len].iter().map(|c| c.re / n as f64).collect()
}

/// Impulse responses from the source to each microphone of a free-field
/// array, and the capture length they imply for `source_len` samples.
pub fn room_impulse_responses(room: &RoomSpec, geom: &ArrayGeometry) -> Result<Vec<Vec<f64>>> {
    let images = image_sources(room)?;
    let fs = room.sample_rate as f64;
    let half = FRACTIONAL_TAPS / 2 - 1;
    mic_positions(room, geom)
        .par_iter()
        .map(|mic| {
            let mut taps: Vec<(usize, f64, f64)> = Vec::with_capacity(images.len());
            for im in &images {
                let d = norm(&sub(&im.position, mic));
                if d < MIN_DISTANCE {
                    return Err(Error::invalid(format!(
                        "image at {:?} within {d:.2e} m of a microphone",
                        im.position
                    )));
                }
                let delay = d / room.speed_of_sound * fs;
                taps.push((
                    delay.floor() as usize,
                    delay.fract(),
                    im.amplitude / (4.0 * PI * d),
                ));
            }
            let len = taps.iter().map(|t| t.0).max().unwrap_or(0) + FRACTIONAL_TAPS;
            let mut h = vec![0.0; len];
            for (int, frac, amp) in taps {
                for (k, v) in fractional_taps(frac).iter().enumerate() {
                    // taps before time zero are dropped
                    if let Some(i) = (int + k).checked_sub(half) {
                        h[i] += amp * v;
                    }
                }
            }
            Ok(h)
        })
        .collect()
}

/// Room capture of a free-field array placed at the receiver origin.
/// The output is longer than `source` by the longest response.
pub fn simulate_capture(
    room: &RoomSpec,
    geom: &ArrayGeometry,
    source: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_source(source)?;
    let irs = room_impulse_responses(room, geom)?;
    let len = source.len() + irs.iter().map(Vec::len).max().unwrap_or(0);
    Ok(irs
        .par_iter()
        .map(|h| fft_convolve(source, h, len))
        .collect())
}

fn check_source(source: &[f64]) -> Result<()> {
    if source.is_empty() {
        return Err(Error::invalid("empty source signal"));
    }
    if source.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("source has non-finite samples"));
    }
    Ok(())
}

struct PlaneWave {
    arrival: Vec3,
    gain: f64,
    delay: f64,
}

fn sphere_waves(room: &RoomSpec, sphere: &SphereSpec) -> Result<Vec<PlaneWave>> {
    image_sources(room)?
        .iter()
        .map(|im| {
            let v = sub(&im.position, &room.receiver_origin);
            let d = norm(&v);
            if d <= sphere.radius() {
                return Err(Error::invalid("image source inside the sphere"));
            }
            Ok(PlaneWave {
                arrival: Direction::from_vector(v)?.unit(),
                gain: im.amplitude / (4.0 * PI * d),
                delay: d / room.speed_of_sound,
            })
        })
        .collect()
}

/// Response `[bin][mic]` of the sphere microphones at the bins of an
/// `n`-point DFT, for a unit source spectrum.
fn sphere_response(
    room: &RoomSpec,
    sphere: &SphereSpec,
    waves: &[PlaneWave],
    n: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let fs = room.sample_rate as f64;
    let c = room.speed_of_sound;
    let ka_max = PI * sphere.radius() * fs / c;
    if ka_max > MAX_KA {
        return Err(Error::invalid(format!(
            "ka reaches {ka_max:.1} at Nyquist, above the supported {MAX_KA}"
        )));
    }
    let mics: Vec<Vec3> = sphere
        .mic_directions()
        .iter()
        .map(Direction::unit)
        .collect();
    let m = mics.len();
    let cos: Vec<f64> = waves
        .iter()
        .flat_map(|w| mics.iter().map(move |mic| dot(&w.arrival, mic)))
        .collect();
    (0..n / 2 + 1)
        .into_par_iter()
        .map(|k| {
            let f = k as f64 * fs / n as f64;
            let modes = RigidSphereModes::with_default_terms(TAU * f * sphere.radius() / c)?;
            let mut y = vec![Complex64::new(0.0, 0.0); m];
            for (i, w) in waves.iter().enumerate() {
                let g = Complex64::from_polar(w.gain, -TAU * f * w.delay);
                for (j, yj) in y.iter_mut().enumerate() {
                    *yj += g * modes.eval(cos[i * m + j]);
                }
            }
            Ok(y)
        })
        .collect()
}

/// Room capture of a rigid-sphere array centred at the receiver origin.
///
/// Each image contributes a plane wave from its direction, scaled by
/// `amplitude / (4π d)` and delayed by `d / c` with `d` measured to the
/// sphere centre, then scattered by the sphere. Delays are applied exactly
/// in the frequency domain. The output is as long as the free-field
/// [`simulate_capture`] of the same room would be.
pub fn simulate_sphere_capture(
    room: &RoomSpec,
    sphere: &SphereSpec,
    source: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_source(source)?;
    let waves = sphere_waves(room, sphere)?;
    let fs = room.sample_rate as f64;
    let max_delay = waves.iter().map(|w| w.delay * fs).fold(0.0, f64::max);
    let len = source.len() + max_delay.floor() as usize + FRACTIONAL_TAPS;
    let n = (len + 2 * FRACTIONAL_TAPS).next_power_of_two();
    let response = sphere_response(room, sphere, &waves, n)?;

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut x: Vec<Complex64> = source.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    x.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut x);

    Ok((0..sphere.mic_directions().len())
        .into_par_iter()
        .map(|j| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for (k, r) in response.iter().enumerate() {
                buf[k] = r[j] * x[k];
            }
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            for k in 1..n / 2 {
                buf[n - k] = buf[k].conj();
            }
            inv.process(&mut buf);
            buf[..len].iter().map(|v| v.re / n as f64).collect()
        })
        .collect())
}

/// Known plane-wave content of every cell of a synthetic capture.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthScene {
    num_directions: usize,
    frames: usize,
    bins: Vec<usize>,
    /// `[t][bin slot]`
    cells: Vec<Vec<(usize, Complex64)>>,
}

impl GroundTruthScene {
    pub fn empty(num_directions: usize, frames: usize, bins: Vec<usize>) -> Self {
        let n = frames * bins.len();
        Self {
            num_directions,
            frames,
            bins,
            cells: vec![Vec::new(); n],
        }
    }

    /// Random scene with `k_range` atoms per cell drawn uniformly, directions
    /// pairwise at least `min_sep_deg` apart, and weights of magnitude in
    /// `[0.5, 1.5)` with uniform phase.
    pub fn random<R: Rng>(
        grid: &DirectionGrid,
        frames: usize,
        bins: Vec<usize>,
        k_range: (usize, usize),
        min_sep_deg: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Self::random_filtered(grid, frames, bins, k_range, min_sep_deg, rng, |_, _| true)
    }

    /// Like [`random`](Self::random), but every support also satisfies the
    /// exact recovery condition on the atoms of `dict` at its bin, so greedy
    /// pursuit is guaranteed to identify it. Supports that fail are redrawn,
    /// which favours smaller atom counts where the dictionary is coherent.
    pub fn random_recoverable<R: Rng>(
        dict: &DeviceDictionary,
        frames: usize,
        bins: Vec<usize>,
        k_range: (usize, usize),
        min_sep_deg: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let atoms: Vec<AtomMatrix> = bins
            .iter()
            .map(|&b| {
                dict.bin_slot(b)
                    .map(|s| AtomMatrix::from_dictionary(dict, s))
                    .ok_or_else(|| Error::dims(format!("scene bin {b} not in the dictionary")))
            })
            .collect::<Result<_>>()?;
        Self::random_filtered(
            dict.grid(),
            frames,
            bins,
            k_range,
            min_sep_deg,
            rng,
            |slot, s| exact_recovery_coefficient(&atoms[slot], s) < 1.0,
        )
    }

    fn random_filtered<R: Rng>(
        grid: &DirectionGrid,
        frames: usize,
        bins: Vec<usize>,
        k_range: (usize, usize),
        min_sep_deg: f64,
        rng: &mut R,
        accept: impl Fn(usize, &[usize]) -> bool,
    ) -> Result<Self> {
        const SUPPORT_ATTEMPTS: usize = 200;
        const COUNT_ATTEMPTS: usize = 1000;
        let (k_lo, k_hi) = k_range;
        if k_lo > k_hi || k_hi == 0 {
            return Err(Error::invalid("bad atom count range"));
        }
        let nb = bins.len();
        let mut scene = Self::empty(grid.len(), frames, bins);
        let min_sep = min_sep_deg.to_radians();
        let dirs = grid.directions();
        for (i, cell) in scene.cells.iter_mut().enumerate() {
            let slot = i % nb;
            let mut support = None;
            'count: for _ in 0..COUNT_ATTEMPTS {
                let k = rng.gen_range(k_lo..=k_hi);
                for _ in 0..SUPPORT_ATTEMPTS {
                    let Some(s) = separated_support(dirs, k, min_sep, rng) else {
                        continue;
                    };
                    if accept(slot, &s) {
                        support = Some(s);
                        break 'count;
                    }
                }
            }
            let support = support.ok_or_else(|| {
                Error::invalid(format!(
                    "cannot place {k_lo}..={k_hi} directions {min_sep_deg}° apart on this grid"
                ))
            })?;
            *cell = support
                .into_iter()
                .map(|l| {
                    let mag = rng.gen_range(0.5..1.5);
                    let ph = rng.gen_range(0.0..TAU);
                    (l, Complex64::from_polar(mag, ph))
                })
                .collect();
        }
        Ok(scene)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn num_directions(&self) -> usize {
        self.num_directions
    }

    /// Atoms of frame `t` at the `slot`-th scene bin.
    pub fn cell(&self, t: usize, slot: usize) -> &[(usize, Complex64)] {
        &self.cells[t * self.bins.len() + slot]
    }

    pub fn set_cell(
        &mut self,
        t: usize,
        slot: usize,
        atoms: Vec<(usize, Complex64)>,
    ) -> Result<()> {
        if t >= self.frames || slot >= self.bins.len() {
            return Err(Error::invalid("cell outside the scene"));
        }
        if let Some((l, _)) = atoms.iter().find(|(l, _)| *l >= self.num_directions) {
            return Err(Error::invalid(format!("direction {l} beyond the grid")));
        }
        if atoms
            .iter()
            .any(|(_, w)| !w.re.is_finite() || !w.im.is_finite())
        {
            return Err(Error::invalid("non-finite weight"));
        }
        let nb = self.bins.len();
        self.cells[t * nb + slot] = atoms;
        Ok(())
    }
}

/// `k` random grid indices pairwise at least `min_sep` radians apart, or
/// `None` if sequential drawing gets stuck.
fn separated_support<R: Rng>(
    dirs: &[Direction],
    k: usize,
    min_sep: f64,
    rng: &mut R,
) -> Option<Vec<usize>> {
    let mut picked: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..100 * k.max(1) {
        if picked.len() == k {
            break;
        }
        let l = rng.gen_range(0..dirs.len());
        if picked
            .iter()
            .all(|&p| dirs[p].angle_to(&dirs[l]) >= min_sep)
        {
            picked.push(l);
        }
    }
    (picked.len() == k).then_some(picked)
}

/// Spectra of the capture whose exact decomposition is `truth`.
pub fn generate_scene(
    truth: &GroundTruthScene,
    dict: &DeviceDictionary,
    cfg: &StftConfig,
) -> Result<SpectralTensor> {
    cfg.validate()?;
    if cfg.frame_size != dict.freqs().fft_size || cfg.sample_rate != dict.freqs().sample_rate {
        return Err(Error::dims(
            "STFT configuration does not match the dictionary",
        ));
    }
    if truth.num_directions != dict.num_directions() {
        return Err(Error::dims(format!(
            "scene indexes {} directions, dictionary has {}",
            truth.num_directions,
            dict.num_directions()
        )));
    }
    let slots: Vec<usize> = truth
        .bins
        .iter()
        .map(|&b| {
            dict.bin_slot(b)
                .ok_or_else(|| Error::dims(format!("scene bin {b} not in the dictionary")))
        })
        .collect::<Result<_>>()?;
    let m = dict.num_mics();
    let num_samples = truth.frames.saturating_sub(1) * cfg.hop + cfg.frame_size;
    let mut out = SpectralTensor::zeros(truth.frames, m, num_samples, *cfg);
    for t in 0..truth.frames {
        for (s, (&b, &slot)) in truth.bins.iter().zip(&slots).enumerate() {
            let y = out.cell_mut(t, b);
            for &(l, w) in truth.cell(t, s) {
                if l >= dict.num_directions() {
                    return Err(Error::invalid(format!("direction {l} beyond the grid")));
                }
                for (yy, a) in y.iter_mut().zip(dict.atom(slot, l)) {
                    *yy += w * Complex64::new(a.re as f64, a.im as f64);
                }
            }
        }
    }
    Ok(out)
}
