//! Directions, array geometries, frequency grids, and free-field plane waves.
//!
//! Plane waves are indexed by their *arrival* direction, the unit vector
//! pointing from the array toward the far-field source. The propagation
//! wavevector is the negation of that, so a plane wave evaluated at position
//! `r` is `p0 * exp(+j k u·r)` for arrival direction `u`. Microphones closer to
//! the source therefore lead in phase.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex pressure at a point, in relative (dimensionless) units.
pub type ComplexPressure = Complex64;

pub type Vec3 = [f64; 3];

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn finite3(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// A direction on the unit sphere.
///
/// `azimuth` lies in `[0, 2π)`, `elevation` is the polar angle from `+z` in
/// `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::invalid("direction angles must be finite"));
        }
        if !(0.0..=PI).contains(&elevation) {
            return Err(Error::invalid(format!(
                "elevation {elevation} outside [0, π]"
            )));
        }
        let mut azimuth = azimuth.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        if azimuth >= TAU {
            azimuth = 0.0;
        }
        Ok(Self { azimuth, elevation })
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    /// Direction of a non-zero vector.
    pub fn from_vector(v: Vec3) -> Result<Self> {
        let n = norm(&v);
        if !finite3(&v) || n == 0.0 {
            return Err(Error::invalid(
                "direction vector must be finite and non-zero",
            ));
        }
        let elevation = (v[2] / n).clamp(-1.0, 1.0).acos();
        let azimuth = v[1].atan2(v[0]);
        Self::new(azimuth, elevation)
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn unit(&self) -> Vec3 {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        [se * ca, se * sa, ce]
    }

    /// Angle between two directions in radians.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let (a, b) = (self.unit(), other.unit());
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        norm(&cross).atan2(dot(&a, &b))
    }

    pub fn antipode(&self) -> Direction {
        Direction {
            azimuth: (self.azimuth + PI).rem_euclid(TAU),
            elevation: PI - self.elevation,
        }
    }
}

impl TryFrom<[f64; 2]> for Direction {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Direction::new(v[0], v[1])
    }
}

impl From<Direction> for [f64; 2] {
    fn from(d: Direction) -> Self {
        [d.azimuth, d.elevation]
    }
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    positions_m: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

/// Microphone positions in meters relative to the array origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct ArrayGeometry {
    positions: Vec<Vec3>,
    labels: Option<Vec<String>>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<Vec3>, labels: Option<Vec<String>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid(
                "array geometry needs at least one microphone",
            ));
        }
        if let Some(p) = positions.iter().find(|p| !finite3(p)) {
            return Err(Error::invalid(format!(
                "non-finite microphone position {p:?}"
            )));
        }
        for (i, a) in positions.iter().enumerate() {
            for (j, b) in positions.iter().enumerate().skip(i + 1) {
                if norm(&sub(a, b)) <= 1e-9 {
                    return Err(Error::invalid(format!(
                        "microphones {i} and {j} share a position"
                    )));
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != positions.len() {
                return Err(Error::invalid(format!(
                    "{} labels for {} microphones",
                    l.len(),
                    positions.len()
                )));
            }
        }
        Ok(Self { positions, labels })
    }

    pub fn from_positions(positions: Vec<Vec3>) -> Result<Self> {
        Self::new(positions, None)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }
}

impl TryFrom<GeometryRepr> for ArrayGeometry {
    type Error = Error;

    fn try_from(r: GeometryRepr) -> Result<Self> {
        ArrayGeometry::new(r.positions_m, r.labels)
    }
}

impl From<ArrayGeometry> for GeometryRepr {
    fn from(g: ArrayGeometry) -> Self {
        GeometryRepr {
            positions_m: g.positions,
            labels: g.labels,
        }
    }
}

/// One-sided DFT bin layout plus the propagation medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub sample_rate: u32,
    pub fft_size: usize,
    #[serde(default = "default_speed")]
    pub speed_of_sound: f64,
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

impl FrequencyGrid {
    pub fn new(sample_rate: u32, fft_size: usize) -> Result<Self> {
        Self::with_speed_of_sound(sample_rate, fft_size, DEFAULT_SPEED_OF_SOUND)
    }

    pub fn with_speed_of_sound(
        sample_rate: u32,
        fft_size: usize,
        speed_of_sound: f64,
    ) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if fft_size < 2 || !fft_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "fft size {fft_size} must be even and at least 2"
            )));
        }
        if !(speed_of_sound.is_finite() && speed_of_sound > 0.0) {
            return Err(Error::invalid("speed of sound must be positive"));
        }
        Ok(Self {
            sample_rate,
            fft_size,
            speed_of_sound,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.fft_size as f64
    }

    pub fn bin_freqs(&self) -> Vec<f64> {
        (0..self.num_bins()).map(|k| self.bin_freq(k)).collect()
    }

    /// Bins whose center frequency lies in `[lo, hi]` Hz.
    pub fn bins_in_range(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.num_bins())
            .filter(|&k| {
                let f = self.bin_freq(k);
                f >= lo && f <= hi
            })
            .collect()
    }

    pub fn wavenumber(&self, freq: f64) -> f64 {
        TAU * freq / self.speed_of_sound
    }
}

/// Pressure of a unit-direction plane wave at `pos`.
pub fn plane_wave_pressure(
    p0: f64,
    freq: f64,
    grid: &FrequencyGrid,
    dir: &Direction,
    pos: &Vec3,
) -> Result<ComplexPressure> {
    if !p0.is_finite() || !freq.is_finite() || !finite3(pos) {
        return Err(Error::invalid("plane wave inputs must be finite"));
    }
    if freq < 0.0 {
        return Err(Error::invalid(format!("negative frequency {freq}")));
    }
    let phase = grid.wavenumber(freq) * dot(&dir.unit(), pos);
    Ok(Complex64::from_polar(p0, phase))
}

/// Free-field array response to a unit plane wave arriving from `dir`.
pub fn steering_vector(
    geom: &ArrayGeometry,
    freq: f64,
    grid: &FrequencyGrid,
    dir: &Direction,
) -> Result<Vec<ComplexPressure>> {
    if geom.is_empty() {
        return Err(Error::invalid("empty array geometry"));
    }
    geom.positions()
        .iter()
        .map(|p| plane_wave_pressure(1.0, freq, grid, dir, p))
        .collect()
}
