//! Sparse plane-wave decomposition by orthogonal matching pursuit.

mod io;

use num_complex::{Complex32, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::DeviceDictionary;
use crate::error::{Error, Result};
use crate::geometry::FrequencyGrid;
use crate::stft::{SpectralTensor, StftConfig};

pub use io::{load_map, read_map, save_map, write_map};

/// Lowest value a GoA figure is reported as.
pub const GOA_FLOOR_DB: f64 = -120.0;

/// Below this the new column of the QR factor counts as linearly dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    pub max_atoms: usize,
    pub residual_stop_db: f64,
    /// Selection stops once the best correlation with a unit-norm atom drops
    /// below `min_correlation · ‖y‖`.
    pub min_correlation: f64,
    /// Inclusive band in Hz; bins outside are not decomposed.
    pub bin_range: (f64, f64),
    /// Sparsity weight of the convex formulation. Not used by the greedy
    /// solver and kept only so configurations carry it through.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            max_atoms: 30,
            residual_stop_db: -30.0,
            min_correlation: 1e-12,
            bin_range: (50.0, 8000.0),
            lambda: None,
        }
    }
}

impl DecompositionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_atoms == 0 || self.max_atoms > u32::MAX as usize {
            return Err(Error::invalid("max_atoms must be at least 1"));
        }
        if self.residual_stop_db.is_nan() || self.residual_stop_db >= 0.0 {
            return Err(Error::invalid(format!(
                "residual_stop_db must be negative, got {}",
                self.residual_stop_db
            )));
        }
        if !(self.min_correlation.is_finite() && self.min_correlation >= 0.0) {
            return Err(Error::invalid(
                "min_correlation must be finite and non-negative",
            ));
        }
        let (lo, hi) = self.bin_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return Err(Error::invalid(format!("bad bin range {lo}..{hi} Hz")));
        }
        Ok(())
    }
}

/// Dictionary columns for one bin, scaled to unit norm and split into real
/// and imaginary planes.
#[derive(Debug, Clone)]
pub struct AtomMatrix {
    mics: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    norms: Vec<f64>,
}

impl AtomMatrix {
    /// `atoms` holds `L` columns of `mics` entries each, column-major.
    pub fn new(atoms: &[Complex64], mics: usize) -> Result<Self> {
        Self::build(atoms.iter().copied(), atoms.len(), mics)
    }

    pub fn from_c32(atoms: &[Complex32], mics: usize) -> Result<Self> {
        Self::build(
            atoms
                .iter()
                .map(|c| Complex64::new(c.re as f64, c.im as f64)),
            atoms.len(),
            mics,
        )
    }

    /// Atoms of dictionary bin slot `slot`.
    pub fn from_dictionary(dict: &DeviceDictionary, slot: usize) -> Self {
        Self::from_c32(dict.slot_atoms(slot), dict.num_mics())
            .expect("dictionary tensors are validated on construction")
    }

    fn build(atoms: impl Iterator<Item = Complex64>, len: usize, mics: usize) -> Result<Self> {
        if mics == 0 || len == 0 || !len.is_multiple_of(mics) {
            return Err(Error::dims(format!(
                "{len} atom entries do not form columns of {mics} microphones"
            )));
        }
        let mut re = Vec::with_capacity(len);
        let mut im = Vec::with_capacity(len);
        for c in atoms {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::invalid("atoms contain non-finite values"));
            }
            re.push(c.re);
            im.push(c.im);
        }
        let mut norms = Vec::with_capacity(len / mics);
        for (cr, ci) in re.chunks_mut(mics).zip(im.chunks_mut(mics)) {
            let n = cr
                .iter()
                .chain(ci.iter())
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if n > 0.0 {
                cr.iter_mut().chain(ci.iter_mut()).for_each(|v| *v /= n);
            }
            norms.push(n);
        }
        Ok(Self {
            mics,
            re,
            im,
            norms,
        })
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Norm of the raw column before normalization.
    pub fn norm(&self, l: usize) -> f64 {
        self.norms[l]
    }

    /// Unit-norm column `l`.
    pub fn column(&self, l: usize) -> Vec<Complex64> {
        let s = l * self.mics;
        (s..s + self.mics)
            .map(|i| Complex64::new(self.re[i], self.im[i]))
            .collect()
    }

    /// `⟨a_l, r⟩` for every column.
    fn correlate(&self, r_re: &[f64], r_im: &[f64], out: &mut [f64]) {
        for ((cr, ci), o) in self
            .re
            .chunks_exact(self.mics)
            .zip(self.im.chunks_exact(self.mics))
            .zip(out.iter_mut())
        {
            let (mut sr, mut si) = (0.0, 0.0);
            for m in 0..self.mics {
                sr += cr[m] * r_re[m] + ci[m] * r_im[m];
                si += cr[m] * r_im[m] - ci[m] * r_re[m];
            }
            *o = sr * sr + si * si;
        }
    }
}

/// Output of [`decompose_cell`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellDecomposition {
    /// Selected direction indices in selection order.
    pub indices: Vec<usize>,
    /// Weights on the raw (unnormalized) atoms.
    pub weights: Vec<Complex64>,
    /// `20·log10(‖y − Aα‖ / ‖y‖)`, `-∞` for an exact fit or `y = 0`.
    pub residual_db: f64,
    /// Residual energy `‖y − A_k α_k‖²` after each of the `k = 0..=K` steps.
    pub residual_path: Vec<f64>,
}

fn db20(ratio: f64) -> f64 {
    20.0 * ratio.log10()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Greedy sparse fit of `y` against the columns of `atoms`.
pub fn decompose_cell(
    y: &[Complex64],
    atoms: &AtomMatrix,
    cfg: &DecompositionConfig,
) -> Result<CellDecomposition> {
    cfg.validate()?;
    if y.len() != atoms.mics() {
        return Err(Error::dims(format!(
            "observation has {} channels, atoms have {}",
            y.len(),
            atoms.mics()
        )));
    }
    if y.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::invalid("observation has non-finite entries"));
    }
    Ok(omp(y, atoms, cfg))
}

/// Incremental QR factorization `A_S = Q R` of the active columns, with
/// classical Gram-Schmidt applied twice per new column.
struct ActiveSet {
    q: Vec<Vec<Complex64>>,
    /// upper-triangular factor, column by column
    r: Vec<Vec<Complex64>>,
}

impl ActiveSet {
    fn with_capacity(k: usize) -> Self {
        Self {
            q: Vec::with_capacity(k),
            r: Vec::with_capacity(k),
        }
    }

    /// Appends a column; returns the new orthonormal direction, or `None`
    /// if the column lies in the span of the current ones.
    fn push(&mut self, a: &[Complex64]) -> Option<&[Complex64]> {
        let mut v = a.to_vec();
        let mut col = vec![Complex64::new(0.0, 0.0); self.q.len() + 1];
        for _ in 0..2 {
            for (i, qi) in self.q.iter().enumerate() {
                let c = cdot(qi, &v);
                col[i] += c;
                v.iter_mut().zip(qi).for_each(|(vv, qq)| *vv -= c * qq);
            }
        }
        let rkk = energy(&v).sqrt();
        if rkk < RANK_TOL {
            return None;
        }
        v.iter_mut().for_each(|c| *c /= rkk);
        col[self.q.len()] = Complex64::new(rkk, 0.0);
        self.q.push(v);
        self.r.push(col);
        self.q.last().map(Vec::as_slice)
    }

    /// Solves `R w = z` by back-substitution.
    fn solve(&self, z: &[Complex64]) -> Vec<Complex64> {
        let k = z.len();
        let mut w = vec![Complex64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut s = z[i];
            for j in i + 1..k {
                s -= self.r[j][i] * w[j];
            }
            w[i] = s / self.r[i][i];
        }
        w
    }

    /// Least-squares coefficients of `v` on the active columns.
    fn coefficients(&self, v: &[Complex64]) -> Vec<Complex64> {
        let z: Vec<Complex64> = self.q.iter().map(|qi| cdot(qi, v)).collect();
        self.solve(&z)
    }
}

/// Exact recovery coefficient `max_{l ∉ S} ‖A_S⁺ a_l‖₁` of a support, on the
/// unit-norm columns. Below 1, greedy pursuit recovers every signal supported
/// on `support`. Returns infinity for a linearly dependent support.
pub fn exact_recovery_coefficient(atoms: &AtomMatrix, support: &[usize]) -> f64 {
    let mut qr = ActiveSet::with_capacity(support.len());
    for &l in support {
        if qr.push(&atoms.column(l)).is_none() {
            return f64::INFINITY;
        }
    }
    (0..atoms.len())
        .filter(|l| !support.contains(l))
        .map(|l| {
            qr.coefficients(&atoms.column(l))
                .iter()
                .map(|c| c.norm())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn omp(y: &[Complex64], atoms: &AtomMatrix, cfg: &DecompositionConfig) -> CellDecomposition {
    let m = atoms.mics();
    let y_energy = energy(y);
    let mut path = vec![y_energy];
    if y_energy == 0.0 {
        return CellDecomposition {
            indices: Vec::new(),
            weights: Vec::new(),
            residual_db: f64::NEG_INFINITY,
            residual_path: path,
        };
    }
    let y_norm = y_energy.sqrt();
    let floor_sq = (cfg.min_correlation * y_norm).powi(2);
    let k_max = cfg.max_atoms.min(atoms.len()).min(m);

    let mut r: Vec<Complex64> = y.to_vec();
    let (mut r_re, mut r_im) = (vec![0.0; m], vec![0.0; m]);
    let mut corr = vec![0.0; atoms.len()];
    let mut selected: Vec<usize> = Vec::with_capacity(k_max);
    let mut qr = ActiveSet::with_capacity(k_max);
    let mut z: Vec<Complex64> = Vec::with_capacity(k_max);

    while selected.len() < k_max {
        for (i, c) in r.iter().enumerate() {
            r_re[i] = c.re;
            r_im[i] = c.im;
        }
        atoms.correlate(&r_re, &r_im, &mut corr);
        for &l in &selected {
            corr[l] = -1.0;
        }
        let mut best = 0;
        for l in 1..corr.len() {
            if corr[l] > corr[best] {
                best = l;
            }
        }
        if corr[best] < floor_sq || corr[best] <= 0.0 {
            break;
        }
        let Some(q) = qr.push(&atoms.column(best)) else {
            break;
        };
        let zk = cdot(q, y);
        r.iter_mut().zip(q).for_each(|(rr, qq)| *rr -= zk * qq);
        z.push(zk);
        selected.push(best);

        let res = energy(&r);
        path.push(res);
        if db20((res / y_energy).sqrt()) <= cfg.residual_stop_db {
            break;
        }
    }

    let w = qr.solve(&z);
    let weights: Vec<Complex64> = w
        .iter()
        .zip(&selected)
        .map(|(wi, &l)| wi / atoms.norm(l))
        .collect();

    let mut resid = y.to_vec();
    for (wi, &l) in w.iter().zip(&selected) {
        for (rr, a) in resid.iter_mut().zip(atoms.column(l)) {
            *rr -= wi * a;
        }
    }
    CellDecomposition {
        indices: selected,
        weights,
        residual_db: db20((energy(&resid) / y_energy).sqrt()),
        residual_path: path,
    }
}

/// One selected plane wave of a time-frequency cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapAtom {
    pub direction: u32,
    pub weight: Complex64,
}

/// Sparse plane-wave description of a capture, one atom list per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrequencyMap {
    grid_hash: String,
    num_directions: usize,
    freqs: FrequencyGrid,
    stft: StftConfig,
    frames: usize,
    num_samples: usize,
    config: DecompositionConfig,
    bins: Vec<usize>,
    cells: Vec<Vec<MapAtom>>,
}

impl TimeFrequencyMap {
    /// An empty map; every cell of `bins` is decomposed but holds no atoms.
    #[allow(clippy::too_many_arguments)]
    pub fn empty(
        grid_hash: String,
        num_directions: usize,
        freqs: FrequencyGrid,
        stft: StftConfig,
        frames: usize,
        num_samples: usize,
        config: DecompositionConfig,
        bins: Vec<usize>,
    ) -> Result<Self> {
        if freqs.fft_size != stft.frame_size || freqs.sample_rate != stft.sample_rate {
            return Err(Error::dims(
                "frequency grid disagrees with the STFT configuration",
            ));
        }
        if bins.windows(2).any(|w| w[0] >= w[1]) || bins.iter().any(|&b| b >= freqs.num_bins()) {
            return Err(Error::invalid(
                "map bins must be increasing and within the grid",
            ));
        }
        let n = frames * freqs.num_bins();
        Ok(Self {
            grid_hash,
            num_directions,
            freqs,
            stft,
            frames,
            num_samples,
            config,
            bins,
            cells: vec![Vec::new(); n],
        })
    }

    pub fn grid_hash(&self) -> &str {
        &self.grid_hash
    }

    pub fn num_directions(&self) -> usize {
        self.num_directions
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn stft_config(&self) -> &StftConfig {
        &self.stft
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Bins per frame, decomposed or not.
    pub fn num_bins(&self) -> usize {
        self.freqs.num_bins()
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn config(&self) -> &DecompositionConfig {
        &self.config
    }

    /// Bins that were decomposed.
    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn cell(&self, t: usize, f: usize) -> &[MapAtom] {
        &self.cells[t * self.freqs.num_bins() + f]
    }

    /// Replaces the atoms of one cell after checking the cell invariants.
    pub fn set_cell(&mut self, t: usize, f: usize, atoms: Vec<MapAtom>) -> Result<()> {
        if t >= self.frames || self.bins.binary_search(&f).is_err() {
            return Err(Error::invalid(format!(
                "cell ({t}, {f}) is not part of the map"
            )));
        }
        if atoms.len() > self.config.max_atoms {
            return Err(Error::invalid(format!(
                "{} atoms exceed max_atoms = {}",
                atoms.len(),
                self.config.max_atoms
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for a in &atoms {
            if a.direction as usize >= self.num_directions {
                return Err(Error::invalid(format!(
                    "direction {} beyond grid of {}",
                    a.direction, self.num_directions
                )));
            }
            if !seen.insert(a.direction) {
                return Err(Error::invalid(format!(
                    "direction {} repeated in a cell",
                    a.direction
                )));
            }
            if !a.weight.re.is_finite() || !a.weight.im.is_finite() {
                return Err(Error::invalid("non-finite weight"));
            }
        }
        let nb = self.freqs.num_bins();
        self.cells[t * nb + f] = atoms;
        Ok(())
    }

    /// Total number of atoms over all cells.
    pub fn atom_count(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }
}

/// Per-cell residual energies along the greedy path, for evaluating the
/// fit at every atom budget from one decomposition.
#[derive(Debug, Clone)]
pub struct ResidualTrace {
    bins: Vec<usize>,
    frames: usize,
    /// `[t][bin slot]` residual energies after `0..=K` atoms.
    paths: Vec<Vec<f64>>,
}

impl ResidualTrace {
    /// Longest atom count reached in any cell.
    pub fn max_atoms(&self) -> usize {
        self.paths.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }

    /// GoA obtained if every cell were capped at `k` atoms.
    pub fn goa_at(&self, k: usize) -> Result<GoaReport> {
        let nb = self.bins.len();
        let mut obs = vec![0.0; nb];
        let mut res = vec![0.0; nb];
        for t in 0..self.frames {
            for s in 0..nb {
                let p = &self.paths[t * nb + s];
                obs[s] += p[0];
                res[s] += p[k.min(p.len() - 1)];
            }
        }
        GoaReport::from_energies(&self.bins, &obs, &res)
    }
}

/// GoA figures of one bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGoa {
    pub bin: usize,
    pub observed_energy: f64,
    pub residual_energy: f64,
    pub db: f64,
}

/// Ratio of residual to observed energy, in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct GoaReport {
    /// Bins with nonzero observed energy.
    pub per_bin: Vec<BinGoa>,
    pub aggregate_db: f64,
}

fn floored_db10(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        GOA_FLOOR_DB
    } else {
        (10.0 * (num / den).log10()).max(GOA_FLOOR_DB)
    }
}

impl GoaReport {
    fn from_energies(bins: &[usize], obs: &[f64], res: &[f64]) -> Result<Self> {
        let per_bin: Vec<BinGoa> = bins
            .iter()
            .zip(obs.iter().zip(res))
            .filter(|(_, (o, _))| **o > 0.0)
            .map(|(&bin, (&o, &r))| BinGoa {
                bin,
                observed_energy: o,
                residual_energy: r,
                db: floored_db10(r, o),
            })
            .collect();
        let aggregate_db = Self::aggregate(&per_bin)?;
        Ok(Self {
            per_bin,
            aggregate_db,
        })
    }

    fn aggregate<'a>(bins: impl IntoIterator<Item = &'a BinGoa>) -> Result<f64> {
        let (o, r) = bins.into_iter().fold((0.0, 0.0), |(o, r), b| {
            (o + b.observed_energy, r + b.residual_energy)
        });
        if o <= 0.0 {
            return Err(Error::NoSignalEnergy);
        }
        Ok(floored_db10(r, o))
    }

    /// Aggregate GoA over the bins whose centre frequency lies in `[lo, hi]` Hz.
    pub fn band(&self, freqs: &FrequencyGrid, lo: f64, hi: f64) -> Result<f64> {
        Self::aggregate(self.per_bin.iter().filter(|b| {
            let f = freqs.bin_freq(b.bin);
            f >= lo && f <= hi
        }))
    }
}

fn check_inputs(spec: &SpectralTensor, dict: &DeviceDictionary) -> Result<()> {
    if spec.channels() != dict.num_mics() {
        return Err(Error::dims(format!(
            "capture has {} channels, dictionary has {} microphones",
            spec.channels(),
            dict.num_mics()
        )));
    }
    let sc = spec.config();
    let fg = dict.freqs();
    if sc.frame_size != fg.fft_size || sc.sample_rate != fg.sample_rate {
        return Err(Error::dims(format!(
            "STFT uses {} points at {} Hz, dictionary {} points at {} Hz",
            sc.frame_size, sc.sample_rate, fg.fft_size, fg.sample_rate
        )));
    }
    Ok(())
}

/// Dictionary bins whose frequency lies in the configured band.
fn active_bins(dict: &DeviceDictionary, cfg: &DecompositionConfig) -> Result<Vec<usize>> {
    let (lo, hi) = cfg.bin_range;
    let fg = dict.freqs();
    let bins: Vec<usize> = dict
        .bins()
        .iter()
        .copied()
        .filter(|&b| {
            let f = fg.bin_freq(b);
            f >= lo && f <= hi
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::invalid(format!(
            "dictionary stores no bins within {lo}..{hi} Hz"
        )));
    }
    Ok(bins)
}

/// Decomposes every in-band cell of `spec`.
pub fn decompose(
    spec: &SpectralTensor,
    dict: &DeviceDictionary,
    cfg: &DecompositionConfig,
) -> Result<TimeFrequencyMap> {
    decompose_traced(spec, dict, cfg).map(|(map, _)| map)
}

/// [`decompose`] that also returns the residual path of every cell.
pub fn decompose_traced(
    spec: &SpectralTensor,
    dict: &DeviceDictionary,
    cfg: &DecompositionConfig,
) -> Result<(TimeFrequencyMap, ResidualTrace)> {
    cfg.validate()?;
    check_inputs(spec, dict)?;
    let bins = active_bins(dict, cfg)?;
    let frames = spec.frames();
    let nb = bins.len();

    let per_bin: Vec<Vec<CellDecomposition>> = bins
        .par_iter()
        .map(|&b| {
            let slot = dict
                .bin_slot(b)
                .expect("active bins come from the dictionary");
            let atoms = AtomMatrix::from_dictionary(dict, slot);
            (0..frames)
                .map(|t| omp(spec.cell(t, b), &atoms, cfg))
                .collect()
        })
        .collect();

    let mut map = TimeFrequencyMap::empty(
        dict.grid().content_hash(),
        dict.num_directions(),
        *dict.freqs(),
        *spec.config(),
        frames,
        spec.num_samples(),
        *cfg,
        bins.clone(),
    )?;
    let mut paths = vec![Vec::new(); frames * nb];
    let nbins = map.num_bins();
    for (s, (cells, &b)) in per_bin.into_iter().zip(&bins).enumerate() {
        for (t, cell) in cells.into_iter().enumerate() {
            map.cells[t * nbins + b] = cell
                .indices
                .iter()
                .zip(&cell.weights)
                .map(|(&l, &w)| MapAtom {
                    direction: l as u32,
                    weight: w,
                })
                .collect();
            paths[t * nb + s] = cell.residual_path;
        }
    }
    Ok((
        map,
        ResidualTrace {
            bins,
            frames,
            paths,
        },
    ))
}

fn check_map(map: &TimeFrequencyMap, dict: &DeviceDictionary) -> Result<()> {
    if map.grid_hash != dict.grid().content_hash() {
        return Err(Error::dims(
            "map and dictionary use different direction grids",
        ));
    }
    let fg = dict.freqs();
    if map.freqs.fft_size != fg.fft_size || map.freqs.sample_rate != fg.sample_rate {
        return Err(Error::dims(
            "map and dictionary use different frequency grids",
        ));
    }
    Ok(())
}

/// Reconstruction error of `map` against the capture it was computed from.
pub fn goa(
    map: &TimeFrequencyMap,
    dict: &DeviceDictionary,
    spec: &SpectralTensor,
) -> Result<GoaReport> {
    check_inputs(spec, dict)?;
    check_map(map, dict)?;
    if map.frames != spec.frames() {
        return Err(Error::dims(format!(
            "map has {} frames, capture {}",
            map.frames,
            spec.frames()
        )));
    }
    let mut slots = Vec::with_capacity(map.bins.len());
    for &b in &map.bins {
        slots.push(
            dict.bin_slot(b)
                .ok_or_else(|| Error::dims(format!("map bin {b} missing from the dictionary")))?,
        );
    }
    let energies: Vec<(f64, f64)> = map
        .bins
        .par_iter()
        .zip(slots.par_iter())
        .map(|(&b, &slot)| {
            let (mut obs, mut res) = (0.0, 0.0);
            for t in 0..map.frames {
                let y = spec.cell(t, b);
                let mut r = y.to_vec();
                for a in map.cell(t, b) {
                    for (rr, d) in r.iter_mut().zip(dict.atom(slot, a.direction as usize)) {
                        *rr -= a.weight * Complex64::new(d.re as f64, d.im as f64);
                    }
                }
                obs += energy(y);
                res += energy(&r);
            }
            (obs, res)
        })
        .collect();
    let (obs, res): (Vec<f64>, Vec<f64>) = energies.into_iter().unzip();
    GoaReport::from_energies(&map.bins, &obs, &res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_rigid_sphere, DirectionGrid, SphereSpec};
    use crate::geometry::Direction;

    fn em32_at(bin: usize) -> DeviceDictionary {
        let f = FrequencyGrid::new(16_000, 1024).unwrap();
        build_rigid_sphere(
            &SphereSpec::em32(0.042).unwrap(),
            &DirectionGrid::equiangular(10.0).unwrap(),
            &f,
            &[bin],
        )
        .unwrap()
    }

    fn cfg() -> DecompositionConfig {
        DecompositionConfig {
            residual_stop_db: -150.0,
            ..DecompositionConfig::default()
        }
    }

    fn mix(dict: &DeviceDictionary, parts: &[(usize, Complex64)]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); dict.num_mics()];
        for &(l, w) in parts {
            for (yy, a) in y.iter_mut().zip(dict.atom_f64(0, l)) {
                *yy += w * a;
            }
        }
        y
    }

    #[test]
    fn single_scaled_atom() {
        let d = em32_at(192);
        let atoms = AtomMatrix::from_dictionary(&d, 0);
        let y = mix(&d, &[(17, Complex64::new(3.5, 0.0))]);
        let out = decompose_cell(&y, &atoms, &DecompositionConfig::default()).unwrap();
        assert_eq!(out.indices, vec![17]);
        assert!((out.weights[0] - Complex64::new(3.5, 0.0)).norm() < 1e-9);
        assert!(out.residual_db <= -120.0);
    }

    #[test]
    fn three_separated_atoms() {
        let d = em32_at(192);
        let grid = d.grid();
        let picks = [
            grid.nearest(&Direction::from_degrees(20.0, 60.0).unwrap()),
            grid.nearest(&Direction::from_degrees(140.0, 100.0).unwrap()),
            grid.nearest(&Direction::from_degrees(260.0, 40.0).unwrap()),
        ];
        for i in 0..3 {
            for j in i + 1..3 {
                let a = grid.directions()[picks[i]].angle_to(&grid.directions()[picks[j]]);
                assert!(a.to_degrees() >= 30.0);
            }
        }
        let w = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(-0.25, 0.0),
        ];
        let y = mix(&d, &[(picks[0], w[0]), (picks[1], w[1]), (picks[2], w[2])]);
        let out = decompose_cell(&y, &AtomMatrix::from_dictionary(&d, 0), &cfg()).unwrap();
        let mut got: Vec<(usize, Complex64)> = out
            .indices
            .iter()
            .copied()
            .zip(out.weights.iter().copied())
            .collect();
        got.sort_by_key(|p| p.0);
        let mut want: Vec<(usize, Complex64)> = picks.iter().copied().zip(w).collect();
        want.sort_by_key(|p| p.0);
        assert_eq!(got.len(), 3);
        for ((gl, gw), (wl, ww)) in got.iter().zip(&want) {
            assert_eq!(gl, wl);
            assert!((gw - ww).norm() <= 1e-6 * ww.norm());
        }
    }

    #[test]
    fn zero_observation() {
        let d = em32_at(100);
        let y = vec![Complex64::new(0.0, 0.0); 32];
        let out = decompose_cell(&y, &AtomMatrix::from_dictionary(&d, 0), &cfg()).unwrap();
        assert!(out.indices.is_empty());
        assert_eq!(out.residual_db, f64::NEG_INFINITY);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let c = |re| Complex64::new(re, 0.0);
        let atoms = AtomMatrix::new(&[c(1.0), c(0.0), c(1.0), c(0.0), c(0.0), c(1.0)], 2).unwrap();
        let y = [c(1.0), c(0.0)];
        let out = decompose_cell(&y, &atoms, &cfg()).unwrap();
        assert_eq!(out.indices, vec![0]);
    }

    #[test]
    fn duplicate_column_is_dropped_as_rank_deficient() {
        let c = |re, im| Complex64::new(re, im);
        // columns 0 and 1 are parallel; column 2 is independent
        let atoms = AtomMatrix::new(
            &[
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(0.0, 2.0),
                c(0.0, 2.0),
                c(1.0, 0.0),
                c(-1.0, 0.0),
            ],
            2,
        )
        .unwrap();
        let y = [c(1.0, 0.0), c(1.0, 0.0)];
        let out = decompose_cell(&y, &atoms, &cfg()).unwrap();
        assert_eq!(out.indices, vec![0]);
        assert_eq!(out.residual_db, f64::NEG_INFINITY);
    }

    #[test]
    fn residual_orthogonal_to_support_and_no_repeats() {
        let d = em32_at(300);
        let atoms = AtomMatrix::from_dictionary(&d, 0);
        let y: Vec<Complex64> = (0..32)
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let c = DecompositionConfig {
            max_atoms: 12,
            ..cfg()
        };
        let out = decompose_cell(&y, &atoms, &c).unwrap();
        assert_eq!(out.indices.len(), 12);
        let mut u = out.indices.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), 12);
        let mut r = y.clone();
        for (&l, w) in out.indices.iter().zip(&out.weights) {
            for (rr, a) in r.iter_mut().zip(d.atom_f64(0, l)) {
                *rr -= w * a;
            }
        }
        for &l in &out.indices {
            assert!(cdot(&atoms.column(l), &r).norm() < 1e-8);
        }
        assert!(out
            .residual_path
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn stops_at_residual_threshold() {
        let d = em32_at(300);
        let atoms = AtomMatrix::from_dictionary(&d, 0);
        let y: Vec<Complex64> = (0..32)
            .map(|i| Complex64::new((i as f64 * 0.3).cos(), (i as f64 * 2.1).sin()))
            .collect();
        let out = decompose_cell(&y, &atoms, &DecompositionConfig::default()).unwrap();
        assert!(out.residual_db <= -30.0);
        let before = out.residual_path[out.residual_path.len() - 2] / out.residual_path[0];
        assert!(10.0 * before.log10() > -30.0);
    }

    #[test]
    fn exact_recovery_coefficient_of_orthogonal_and_parallel_atoms() {
        let c = |re, im| Complex64::new(re, im);
        let atoms = AtomMatrix::new(
            &[
                c(1.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
            ],
            2,
        )
        .unwrap();
        // a_2 = (a_0 + a_1)/√2, so its coefficients on {a_0, a_1} sum to √2
        assert!((exact_recovery_coefficient(&atoms, &[0, 1]) - 2f64.sqrt()).abs() < 1e-12);
        assert!((exact_recovery_coefficient(&atoms, &[0]) - 0.5f64.sqrt()).abs() < 1e-12);
        let dup =
            AtomMatrix::new(&[c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0)], 2).unwrap();
        assert_eq!(exact_recovery_coefficient(&dup, &[0, 1]), f64::INFINITY);
    }

    #[test]
    fn config_validation() {
        let bad = [
            DecompositionConfig {
                max_atoms: 0,
                ..cfg()
            },
            DecompositionConfig {
                residual_stop_db: 0.0,
                ..cfg()
            },
            DecompositionConfig {
                bin_range: (100.0, 50.0),
                ..cfg()
            },
            DecompositionConfig {
                min_correlation: f64::NAN,
                ..cfg()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        let d = em32_at(10);
        let atoms = AtomMatrix::from_dictionary(&d, 0);
        assert!(decompose_cell(&[Complex64::new(1.0, 0.0); 3], &atoms, &cfg()).is_err());
    }
}
