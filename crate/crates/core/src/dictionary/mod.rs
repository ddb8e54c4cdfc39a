//! Device acoustic dictionaries.
//!
//! A dictionary holds, for every stored frequency bin and every direction of
//! a [`DirectionGrid`], the complex response of the device's microphones to a
//! unit plane wave arriving from that direction. Values are stored as
//! `Complex32` in `[bin][direction][microphone]` order.

mod io;

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{dot, steering_vector, ArrayGeometry, Direction, FrequencyGrid};
use crate::sphere::{RigidSphereModes, MAX_KA};

pub use io::{load_dictionary, read_dictionary, save_dictionary, write_dictionary, MAGIC, VERSION};

/// Highest frequency stored by default.
pub const DEFAULT_MAX_FREQ_HZ: f64 = 8000.0;

/// Minimum angular separation between grid directions, radians.
const MIN_GRID_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScheme {
    Equiangular,
    Custom,
}

/// Ordered set of plane-wave directions indexing dictionary atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct DirectionGrid {
    directions: Vec<Direction>,
    scheme: GridScheme,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    scheme: GridScheme,
    directions: Vec<Direction>,
}

impl TryFrom<GridRepr> for DirectionGrid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        DirectionGrid::new(r.directions, r.scheme)
    }
}

impl From<DirectionGrid> for GridRepr {
    fn from(g: DirectionGrid) -> Self {
        GridRepr {
            scheme: g.scheme,
            directions: g.directions,
        }
    }
}

impl DirectionGrid {
    pub fn new(directions: Vec<Direction>, scheme: GridScheme) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::invalid("direction grid is empty"));
        }
        let units: Vec<_> = directions.iter().map(|d| d.unit()).collect();
        let min_cos = MIN_GRID_SEPARATION.cos();
        for i in 0..units.len() {
            for j in i + 1..units.len() {
                if dot(&units[i], &units[j]) > min_cos
                    && directions[i].angle_to(&directions[j]) <= MIN_GRID_SEPARATION
                {
                    return Err(Error::invalid(format!(
                        "grid directions {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self { directions, scheme })
    }

    pub fn custom(directions: Vec<Direction>) -> Result<Self> {
        Self::new(directions, GridScheme::Custom)
    }

    /// Rings every `step_deg` of elevation strictly between the poles, each
    /// sampled every `step_deg` of azimuth, plus both poles. A 10° step gives
    /// 17 × 36 + 2 = 614 directions.
    pub fn equiangular(step_deg: f64) -> Result<Self> {
        if !(step_deg > 0.0 && step_deg <= 90.0) {
            return Err(Error::invalid(format!(
                "grid step {step_deg}° outside (0, 90]"
            )));
        }
        let rings = (180.0 / step_deg).round() as usize;
        let per_ring = (360.0 / step_deg).round() as usize;
        if (rings as f64 * step_deg - 180.0).abs() > 1e-9
            || (per_ring as f64 * step_deg - 360.0).abs() > 1e-9
        {
            return Err(Error::invalid(format!(
                "grid step {step_deg}° must divide 180°"
            )));
        }
        let mut dirs = vec![Direction::new(0.0, 0.0)?];
        for e in 1..rings {
            let el = (e as f64 * step_deg).to_radians();
            for a in 0..per_ring {
                dirs.push(Direction::new((a as f64 * step_deg).to_radians(), el)?);
            }
        }
        dirs.push(Direction::new(0.0, PI)?);
        Ok(Self {
            directions: dirs,
            scheme: GridScheme::Equiangular,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    /// SHA-256 over the exact bit patterns of all directions.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.directions.len() as u64).to_le_bytes());
        for d in &self.directions {
            h.update(d.azimuth().to_bits().to_le_bytes());
            h.update(d.elevation().to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Index of the grid direction closest to `dir`.
    pub fn nearest(&self, dir: &Direction) -> usize {
        let u = dir.unit();
        let mut best = (0, f64::NEG_INFINITY);
        for (i, d) in self.directions.iter().enumerate() {
            let c = dot(&u, &d.unit());
            if c > best.1 {
                best = (i, c);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuilderId {
    FreeField,
    RigidSphere,
    Imported,
}

impl BuilderId {
    pub fn code(self) -> u32 {
        match self {
            BuilderId::FreeField => 1,
            BuilderId::RigidSphere => 2,
            BuilderId::Imported => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(BuilderId::FreeField),
            2 => Some(BuilderId::RigidSphere),
            3 => Some(BuilderId::Imported),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMetadata {
    pub device_name: String,
    pub builder: BuilderId,
    /// Plane-wave amplitude scale applied to every atom.
    pub p0: f64,
    /// Sphere radius for rigid-sphere dictionaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_m: Option<f64>,
}

/// A rigid sphere with point microphones on its surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereSpec {
    radius: f64,
    mic_directions: Vec<Direction>,
}

/// Capsule layout of a 32-channel spherical array, `(polar°, azimuth°)`.
const EM32_LAYOUT_DEG: [(f64, f64); 32] = [
    (69.0, 0.0),
    (90.0, 32.0),
    (111.0, 0.0),
    (90.0, 328.0),
    (32.0, 0.0),
    (55.0, 45.0),
    (90.0, 69.0),
    (125.0, 45.0),
    (148.0, 0.0),
    (125.0, 315.0),
    (90.0, 291.0),
    (55.0, 315.0),
    (21.0, 91.0),
    (58.0, 90.0),
    (121.0, 90.0),
    (159.0, 89.0),
    (69.0, 180.0),
    (90.0, 212.0),
    (111.0, 180.0),
    (90.0, 148.0),
    (32.0, 180.0),
    (55.0, 225.0),
    (90.0, 249.0),
    (125.0, 225.0),
    (148.0, 180.0),
    (125.0, 135.0),
    (90.0, 111.0),
    (55.0, 135.0),
    (21.0, 269.0),
    (58.0, 270.0),
    (122.0, 270.0),
    (159.0, 271.0),
];

impl SphereSpec {
    pub fn new(radius: f64, mic_directions: Vec<Direction>) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!(
                "sphere radius {radius} must be positive"
            )));
        }
        if mic_directions.is_empty() {
            return Err(Error::invalid("sphere needs at least one microphone"));
        }
        let spec = Self {
            radius,
            mic_directions,
        };
        // rejects coincident microphones
        spec.geometry()?;
        Ok(spec)
    }

    /// 32 capsules in the layout of the common 4.2 cm spherical array.
    pub fn em32(radius: f64) -> Result<Self> {
        let dirs = EM32_LAYOUT_DEG
            .iter()
            .map(|&(pol, az)| Direction::from_degrees(az, pol))
            .collect::<Result<Vec<_>>>()?;
        Self::new(radius, dirs)
    }

    /// `n` microphones on a Fibonacci spiral.
    pub fn fibonacci(n: usize, radius: f64) -> Result<Self> {
        let golden = PI * (3.0 - 5f64.sqrt());
        let dirs = (0..n)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                Direction::new(golden * i as f64, z.clamp(-1.0, 1.0).acos())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(radius, dirs)
    }

    /// Microphone directions taken from the positions of `geom`.
    pub fn from_geometry(radius: f64, geom: &ArrayGeometry) -> Result<Self> {
        let dirs = geom
            .positions()
            .iter()
            .map(|p| Direction::from_vector(*p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(radius, dirs)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mic_directions(&self) -> &[Direction] {
        &self.mic_directions
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::from_positions(
            self.mic_directions
                .iter()
                .map(|d| d.unit().map(|c| c * self.radius))
                .collect(),
        )
    }
}

/// Complex responses `[bin][direction][microphone]` of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceDictionary {
    geometry: ArrayGeometry,
    grid: DirectionGrid,
    freqs: FrequencyGrid,
    bins: Vec<usize>,
    tensor: Vec<Complex32>,
    meta: DictionaryMetadata,
}

/// Every bin of `freqs` up to `max_hz`.
pub fn bins_up_to(freqs: &FrequencyGrid, max_hz: f64) -> Vec<usize> {
    freqs.bins_in_range(0.0, max_hz)
}

fn check_bins(freqs: &FrequencyGrid, bins: &[usize]) -> Result<()> {
    if bins.is_empty() {
        return Err(Error::invalid("no frequency bins selected"));
    }
    if bins.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("bins must be strictly increasing"));
    }
    if let Some(&b) = bins.iter().find(|&&b| b >= freqs.num_bins()) {
        return Err(Error::invalid(format!(
            "bin {b} beyond the {} bins of the frequency grid",
            freqs.num_bins()
        )));
    }
    Ok(())
}

impl DeviceDictionary {
    /// Wraps an externally computed tensor in `[bin][direction][mic]` order.
    pub fn from_tensor(
        geometry: ArrayGeometry,
        grid: DirectionGrid,
        freqs: FrequencyGrid,
        bins: Vec<usize>,
        tensor: Vec<Complex32>,
        meta: DictionaryMetadata,
    ) -> Result<Self> {
        check_bins(&freqs, &bins)?;
        let expected = bins.len() * grid.len() * geometry.len();
        if tensor.len() != expected {
            return Err(Error::dims(format!(
                "tensor holds {} entries, expected {} bins × {} directions × {} mics = {expected}",
                tensor.len(),
                bins.len(),
                grid.len(),
                geometry.len()
            )));
        }
        if tensor
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::invalid("dictionary tensor has non-finite entries"));
        }
        if !meta.p0.is_finite() {
            return Err(Error::invalid("p0 must be finite"));
        }
        Ok(Self {
            geometry,
            grid,
            freqs,
            bins,
            tensor,
            meta,
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &DirectionGrid {
        &self.grid
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    /// Stored bin indices, strictly increasing.
    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn metadata(&self) -> &DictionaryMetadata {
        &self.meta
    }

    pub fn tensor(&self) -> &[Complex32] {
        &self.tensor
    }

    pub fn num_mics(&self) -> usize {
        self.geometry.len()
    }

    pub fn num_directions(&self) -> usize {
        self.grid.len()
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    /// Position of DFT bin `bin` within the stored bin list.
    pub fn bin_slot(&self, bin: usize) -> Option<usize> {
        self.bins.binary_search(&bin).ok()
    }

    /// All atoms of one stored bin, `L × M` direction-major.
    pub fn slot_atoms(&self, slot: usize) -> &[Complex32] {
        let n = self.grid.len() * self.geometry.len();
        &self.tensor[slot * n..(slot + 1) * n]
    }

    /// Response of the array to direction `l` at stored bin `slot`.
    pub fn atom(&self, slot: usize, l: usize) -> &[Complex32] {
        let m = self.geometry.len();
        let start = (slot * self.grid.len() + l) * m;
        &self.tensor[start..start + m]
    }

    pub fn atom_f64(&self, slot: usize, l: usize) -> Vec<Complex64> {
        self.atom(slot, l)
            .iter()
            .map(|c| Complex64::new(c.re as f64, c.im as f64))
            .collect()
    }

    /// Whether `other` indexes the same directions.
    pub fn same_grid(&self, other: &DirectionGrid) -> bool {
        self.grid.content_hash() == other.content_hash()
    }
}

fn fill<F>(bins: &[usize], n_dirs: usize, n_mics: usize, cell: F) -> Result<Vec<Complex32>>
where
    F: Fn(usize, usize, &mut [Complex32]) -> Result<()> + Sync,
{
    let mut tensor = vec![Complex32::new(0.0, 0.0); bins.len() * n_dirs * n_mics];
    tensor
        .par_chunks_mut(n_dirs * n_mics)
        .zip(bins.par_iter())
        .try_for_each(|(block, &bin)| {
            block
                .chunks_mut(n_mics)
                .enumerate()
                .try_for_each(|(l, out)| cell(bin, l, out))
        })?;
    Ok(tensor)
}

/// Free-field steering vectors of `geom` for every grid direction and bin.
pub fn build_free_field(
    geom: &ArrayGeometry,
    grid: &DirectionGrid,
    freqs: &FrequencyGrid,
    bins: &[usize],
) -> Result<DeviceDictionary> {
    check_bins(freqs, bins)?;
    let tensor = fill(bins, grid.len(), geom.len(), |bin, l, out| {
        let v = steering_vector(geom, freqs.bin_freq(bin), freqs, &grid.directions()[l])?;
        for (o, c) in out.iter_mut().zip(v) {
            *o = Complex32::new(c.re as f32, c.im as f32);
        }
        Ok(())
    })?;
    DeviceDictionary::from_tensor(
        geom.clone(),
        grid.clone(),
        *freqs,
        bins.to_vec(),
        tensor,
        DictionaryMetadata {
            device_name: "free-field".into(),
            builder: BuilderId::FreeField,
            p0: 1.0,
            radius_m: None,
        },
    )
}

/// Total-field responses of microphones on a rigid sphere.
pub fn build_rigid_sphere(
    spec: &SphereSpec,
    grid: &DirectionGrid,
    freqs: &FrequencyGrid,
    bins: &[usize],
) -> Result<DeviceDictionary> {
    check_bins(freqs, bins)?;
    let max_ka = freqs.wavenumber(freqs.bin_freq(*bins.last().unwrap())) * spec.radius;
    if max_ka > MAX_KA {
        return Err(Error::invalid(format!(
            "ka = {max_ka:.2} at the highest bin exceeds the supported limit {MAX_KA}"
        )));
    }
    let mic_units: Vec<_> = spec.mic_directions.iter().map(|d| d.unit()).collect();
    let dir_units: Vec<_> = grid.directions().iter().map(|d| d.unit()).collect();
    let m = mic_units.len();
    let mut tensor = vec![Complex32::new(0.0, 0.0); bins.len() * grid.len() * m];
    tensor
        .par_chunks_mut(grid.len() * m)
        .zip(bins.par_iter())
        .try_for_each(|(block, &bin)| -> Result<()> {
            let ka = freqs.wavenumber(freqs.bin_freq(bin)) * spec.radius;
            let modes = RigidSphereModes::with_default_terms(ka)?;
            for (l, out) in block.chunks_mut(m).enumerate() {
                for (o, mu) in out.iter_mut().zip(&mic_units) {
                    let c = modes.eval(dot(mu, &dir_units[l]));
                    *o = Complex32::new(c.re as f32, c.im as f32);
                }
            }
            Ok(())
        })?;
    DeviceDictionary::from_tensor(
        spec.geometry()?,
        grid.clone(),
        *freqs,
        bins.to_vec(),
        tensor,
        DictionaryMetadata {
            device_name: "rigid-sphere".into(),
            builder: BuilderId::RigidSphere,
            p0: 1.0,
            radius_m: Some(spec.radius),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::plane_wave_pressure;
    use crate::sphere::sphere_surface_pressure;

    fn freqs() -> FrequencyGrid {
        FrequencyGrid::new(16_000, 1024).unwrap()
    }

    #[test]
    fn default_grid_has_614_directions() {
        let g = DirectionGrid::equiangular(10.0).unwrap();
        assert_eq!(g.len(), 614);
        assert_eq!(g.scheme(), GridScheme::Equiangular);
        assert!(DirectionGrid::equiangular(7.0).is_err());
    }

    #[test]
    fn grid_rejects_duplicates() {
        let d = Direction::from_degrees(10.0, 20.0).unwrap();
        assert!(DirectionGrid::custom(vec![d, d]).is_err());
        assert!(DirectionGrid::custom(vec![]).is_err());
    }

    #[test]
    fn grid_hash_tracks_content() {
        let a = DirectionGrid::equiangular(10.0).unwrap();
        let b = DirectionGrid::equiangular(10.0).unwrap();
        let c = DirectionGrid::equiangular(15.0).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn single_mic_at_origin_is_all_ones() {
        let geom = ArrayGeometry::from_positions(vec![[0.0; 3]]).unwrap();
        let grid = DirectionGrid::equiangular(30.0).unwrap();
        let d = build_free_field(&geom, &grid, &freqs(), &[0, 10, 200, 512]).unwrap();
        assert!(d.tensor().iter().all(|c| *c == Complex32::new(1.0, 0.0)));
    }

    #[test]
    fn antipodal_atoms_conjugate_for_centrosymmetric_array() {
        let s = 0.03;
        let geom = ArrayGeometry::from_positions(vec![
            [s, s, 0.0],
            [-s, s, 0.0],
            [-s, -s, 0.0],
            [s, -s, 0.0],
        ])
        .unwrap();
        let d0 = Direction::from_degrees(37.0, 61.0).unwrap();
        let grid = DirectionGrid::custom(vec![d0, d0.antipode()]).unwrap();
        let dict = build_free_field(&geom, &grid, &freqs(), &[128]).unwrap();
        for (a, b) in dict.atom(0, 0).iter().zip(dict.atom(0, 1)) {
            assert!((a - b.conj()).norm() < 1e-6);
        }
    }

    #[test]
    fn square_array_matches_plane_wave_recomputation() {
        let s = 0.03;
        let geom = ArrayGeometry::from_positions(vec![
            [s, s, 0.0],
            [-s, s, 0.0],
            [-s, -s, 0.0],
            [s, -s, 0.0],
        ])
        .unwrap();
        let grid = DirectionGrid::equiangular(30.0).unwrap();
        let f = freqs();
        let bin = 128; // 2 kHz
        let dict = build_free_field(&geom, &grid, &f, &[bin]).unwrap();
        for (l, dir) in grid.directions().iter().enumerate() {
            for (m, pos) in geom.positions().iter().enumerate() {
                let want = plane_wave_pressure(1.0, 2000.0, &f, dir, pos).unwrap();
                let got = dict.atom(0, l)[m];
                assert!((Complex64::new(got.re as f64, got.im as f64) - want).norm() < 1e-6);
                assert!((got.norm() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sphere_tiny_ka_is_unit() {
        let spec = SphereSpec::new(0.042, vec![Direction::new(0.0, 0.0).unwrap()]).unwrap();
        let grid = DirectionGrid::custom(vec![
            Direction::from_degrees(0.0, 0.0).unwrap(),
            Direction::from_degrees(0.0, 180.0).unwrap(),
        ])
        .unwrap();
        let dict = build_rigid_sphere(&spec, &grid, &freqs(), &[0, 1]).unwrap();
        for c in dict.tensor() {
            assert!((c - Complex32::new(1.0, 0.0)).norm() < 0.02);
        }
        assert_eq!(dict.atom(0, 0)[0], Complex32::new(1.0, 0.0));
    }

    #[test]
    fn sphere_entry_symmetric_in_mic_and_arrival() {
        let a = Direction::from_degrees(20.0, 50.0).unwrap();
        let b = Direction::from_degrees(140.0, 110.0).unwrap();
        let f = freqs();
        let bins = [300];
        let d1 = build_rigid_sphere(
            &SphereSpec::new(0.05, vec![a]).unwrap(),
            &DirectionGrid::custom(vec![b]).unwrap(),
            &f,
            &bins,
        )
        .unwrap();
        let d2 = build_rigid_sphere(
            &SphereSpec::new(0.05, vec![b]).unwrap(),
            &DirectionGrid::custom(vec![a]).unwrap(),
            &f,
            &bins,
        )
        .unwrap();
        assert!((d1.atom(0, 0)[0] - d2.atom(0, 0)[0]).norm() < 1e-6);
    }

    #[test]
    fn sphere_matches_surface_pressure() {
        let spec = SphereSpec::em32(0.042).unwrap();
        let grid = DirectionGrid::equiangular(45.0).unwrap();
        let f = freqs();
        let dict = build_rigid_sphere(&spec, &grid, &f, &[64, 400]).unwrap();
        for (slot, &bin) in dict.bins().iter().enumerate() {
            let ka = f.wavenumber(f.bin_freq(bin)) * 0.042;
            for (l, d) in grid.directions().iter().enumerate() {
                for (m, md) in spec.mic_directions().iter().enumerate() {
                    let c = dot(&md.unit(), &d.unit());
                    let want = sphere_surface_pressure(ka, c, crate::sphere::n_terms(ka)).unwrap();
                    let got = dict.atom(slot, l)[m];
                    assert!((Complex64::new(got.re as f64, got.im as f64) - want).norm() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn sphere_approaches_free_field_as_radius_shrinks() {
        let f = freqs();
        let grid = DirectionGrid::equiangular(45.0).unwrap();
        let bin = [64]; // 1 kHz
        let mut last = f64::INFINITY;
        for r in [1e-2, 1e-3, 1e-4, 1e-5] {
            let spec = SphereSpec::em32(r).unwrap();
            let sphere = build_rigid_sphere(&spec, &grid, &f, &bin).unwrap();
            let free = build_free_field(&spec.geometry().unwrap(), &grid, &f, &bin).unwrap();
            let dev = sphere
                .tensor()
                .iter()
                .zip(free.tensor())
                .map(|(a, b)| ((a - b).norm() / b.norm()) as f64)
                .fold(0.0, f64::max);
            assert!(dev < last, "r={r}: {dev} !< {last}");
            last = dev;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn sphere_guard_rejects_large_ka() {
        let spec = SphereSpec::em32(0.5).unwrap();
        let grid = DirectionGrid::equiangular(90.0).unwrap();
        assert!(build_rigid_sphere(&spec, &grid, &freqs(), &[512]).is_err());
    }

    #[test]
    fn atoms_never_vanish() {
        let dict = build_rigid_sphere(
            &SphereSpec::em32(0.042).unwrap(),
            &DirectionGrid::equiangular(20.0).unwrap(),
            &freqs(),
            &bins_up_to(&freqs(), DEFAULT_MAX_FREQ_HZ)[..64],
        )
        .unwrap();
        for slot in 0..dict.num_bins() {
            for l in 0..dict.num_directions() {
                let n: f32 = dict.atom(slot, l).iter().map(|c| c.norm_sqr()).sum();
                assert!(n > 0.0);
            }
        }
    }

    #[test]
    fn from_tensor_checks_shape() {
        let geom = ArrayGeometry::from_positions(vec![[0.0; 3]]).unwrap();
        let grid = DirectionGrid::equiangular(90.0).unwrap();
        let meta = DictionaryMetadata {
            device_name: "x".into(),
            builder: BuilderId::Imported,
            p0: 1.0,
            radius_m: None,
        };
        assert!(DeviceDictionary::from_tensor(
            geom,
            grid,
            freqs(),
            vec![1, 2],
            vec![Complex32::new(1.0, 0.0); 3],
            meta
        )
        .is_err());
    }
}
