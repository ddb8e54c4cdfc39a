//! `.tfm` time-frequency map files.
//!
//! ```text
//! "TFM1"            magic, last byte is the format version
//! u32 LE            JSON header length
//! JSON header       grid hash, direction count, frequency grid, STFT and
//!                   decomposition configs, frames, decomposed bins, record count
//! records           u32 t, u32 f, u32 count, count × (u32 direction, f32 re, f32 im)
//! ```
//! Only cells holding at least one atom are written.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DecompositionConfig, MapAtom, TimeFrequencyMap};
use crate::error::{Error, Result};
use crate::geometry::FrequencyGrid;
use crate::stft::StftConfig;

const MAGIC: &[u8; 3] = b"TFM";
const VERSION: u8 = b'1';

#[derive(Serialize, Deserialize)]
struct Header {
    grid_hash: String,
    num_directions: usize,
    freqs: FrequencyGrid,
    stft: StftConfig,
    frames: usize,
    num_samples: usize,
    config: DecompositionConfig,
    bins: Vec<usize>,
    records: usize,
}

pub fn write_map<W: Write>(map: &TimeFrequencyMap, mut w: W) -> Result<()> {
    let nb = map.num_bins();
    let records = map.cells.iter().filter(|c| !c.is_empty()).count();
    let header = Header {
        grid_hash: map.grid_hash.clone(),
        num_directions: map.num_directions,
        freqs: map.freqs,
        stft: map.stft,
        frames: map.frames,
        num_samples: map.num_samples,
        config: map.config,
        bins: map.bins.clone(),
        records,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(8 + json.len() + map.atom_count() * 12 + records * 12);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (i, cell) in map.cells.iter().enumerate() {
        if cell.is_empty() {
            continue;
        }
        out.extend_from_slice(&((i / nb) as u32).to_le_bytes());
        out.extend_from_slice(&((i % nb) as u32).to_le_bytes());
        out.extend_from_slice(&(cell.len() as u32).to_le_bytes());
        for a in cell {
            out.extend_from_slice(&a.direction.to_le_bytes());
            out.extend_from_slice(&(a.weight.re as f32).to_le_bytes());
            out.extend_from_slice(&(a.weight.im as f32).to_le_bytes());
        }
    }
    w.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                what,
                expected: n,
                found: self.bytes.len() - self.pos,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &'static str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn read_map<R: Read>(mut r: R) -> Result<TimeFrequencyMap> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<TimeFrequencyMap> {
    if bytes.len() < 4 || &bytes[..3] != MAGIC {
        return Err(Error::Format("missing TFM magic".into()));
    }
    if bytes[3] != VERSION {
        if !bytes[3].is_ascii_digit() {
            return Err(Error::Format("missing TFM version digit".into()));
        }
        return Err(Error::Version {
            found: bytes[3] - b'0',
            expected: VERSION - b'0',
        });
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let json_len = cur.u32("header")? as usize;
    let header: Header = serde_json::from_slice(cur.take(json_len, "header")?)?;
    header.config.validate()?;
    header.stft.validate()?;

    let mut map = TimeFrequencyMap::empty(
        header.grid_hash,
        header.num_directions,
        header.freqs,
        header.stft,
        header.frames,
        header.num_samples,
        header.config,
        header.bins,
    )?;
    for _ in 0..header.records {
        let t = cur.u32("record")? as usize;
        let f = cur.u32("record")? as usize;
        let count = cur.u32("record")? as usize;
        if count > map.config.max_atoms {
            return Err(Error::PayloadMismatch(format!(
                "cell ({t}, {f}) claims {count} atoms, max_atoms is {}",
                map.config.max_atoms
            )));
        }
        let mut atoms = Vec::with_capacity(count);
        for _ in 0..count {
            let direction = cur.u32("record")?;
            let re = cur.f32("record")?;
            let im = cur.f32("record")?;
            atoms.push(MapAtom {
                direction,
                weight: Complex64::new(re as f64, im as f64),
            });
        }
        if t < map.frames && f < map.num_bins() && !map.cell(t, f).is_empty() {
            return Err(Error::PayloadMismatch(format!(
                "cell ({t}, {f}) written twice"
            )));
        }
        map.set_cell(t, f, atoms)
            .map_err(|e| Error::PayloadMismatch(e.to_string()))?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::PayloadMismatch(format!(
            "{} trailing bytes after {} records",
            bytes.len() - cur.pos,
            header.records
        )));
    }
    Ok(map)
}

pub fn save_map(map: &TimeFrequencyMap, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_map(map, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<TimeFrequencyMap> {
    decode(&fs::read(path)?)
}
