//! `.wfd` dictionary files.
//!
//! ```text
//! offset size  field
//!      0    4  magic "WFD1" (the last byte is the format version)
//!      4    4  M, microphones                  u32 LE
//!      8    4  L, directions                   u32 LE
//!     12    4  F, stored bins                  u32 LE
//!     16    4  sample rate, Hz                 u32 LE
//!     20    4  fft size                        u32 LE
//!     24    8  sphere radius in m, or 0        f64 LE
//!     32    4  builder id (1 free-field, 2 rigid sphere, 3 imported)
//!     36    4  JSON metadata length in bytes   u32 LE
//!     40    …  JSON metadata (geometry, grid, bin list, device name, p0, c)
//!      …    …  F·L·M pairs of f32 LE (re, im) in [bin][direction][mic] order
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::{BuilderId, DeviceDictionary, DictionaryMetadata, DirectionGrid};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, FrequencyGrid};

pub const MAGIC: &[u8; 3] = b"WFD";
pub const VERSION: u8 = b'1';
const HEADER_LEN: usize = 40;

#[derive(Serialize, Deserialize)]
struct Metadata {
    device_name: String,
    builder: BuilderId,
    p0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius_m: Option<f64>,
    speed_of_sound: f64,
    geometry: ArrayGeometry,
    grid: DirectionGrid,
    bins: Vec<usize>,
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn dim(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n)
        .map_err(|_| Error::invalid(format!("{what} = {n} does not fit the file header")))
}

pub fn write_dictionary<W: Write>(dict: &DeviceDictionary, mut w: W) -> Result<()> {
    let meta = Metadata {
        device_name: dict.meta.device_name.clone(),
        builder: dict.meta.builder,
        p0: dict.meta.p0,
        radius_m: dict.meta.radius_m,
        speed_of_sound: dict.freqs.speed_of_sound,
        geometry: dict.geometry.clone(),
        grid: dict.grid.clone(),
        bins: dict.bins.clone(),
    };
    let json = serde_json::to_vec(&meta)?;
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.push(VERSION);
    header.extend_from_slice(&dim(dict.num_mics(), "M")?.to_le_bytes());
    header.extend_from_slice(&dim(dict.num_directions(), "L")?.to_le_bytes());
    header.extend_from_slice(&dim(dict.num_bins(), "F")?.to_le_bytes());
    header.extend_from_slice(&dict.freqs.sample_rate.to_le_bytes());
    header.extend_from_slice(&dim(dict.freqs.fft_size, "fft size")?.to_le_bytes());
    header.extend_from_slice(&dict.meta.radius_m.unwrap_or(0.0).to_le_bytes());
    header.extend_from_slice(&dict.meta.builder.code().to_le_bytes());
    header.extend_from_slice(&dim(json.len(), "metadata length")?.to_le_bytes());
    debug_assert_eq!(header.len(), HEADER_LEN);
    w.write_all(&header)?;
    w.write_all(&json)?;
    let mut payload = Vec::with_capacity(dict.tensor.len() * 8);
    for c in &dict.tensor {
        payload.extend_from_slice(&c.re.to_le_bytes());
        payload.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_dictionary<R: Read>(mut r: R) -> Result<DeviceDictionary> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<DeviceDictionary> {
    if bytes.len() < 4 || &bytes[..3] != MAGIC {
        return Err(Error::Format("missing WFD magic".into()));
    }
    if !bytes[3].is_ascii_digit() {
        return Err(Error::Format("missing WFD version digit".into()));
    }
    if bytes[3] != VERSION {
        return Err(Error::Version {
            found: bytes[3] - b'0',
            expected: VERSION - b'0',
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            what: "header",
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let m = u32_at(bytes, 4) as usize;
    let l = u32_at(bytes, 8) as usize;
    let f = u32_at(bytes, 12) as usize;
    let sample_rate = u32_at(bytes, 16);
    let fft_size = u32_at(bytes, 20) as usize;
    let radius = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let builder_code = u32_at(bytes, 32);
    let json_len = u32_at(bytes, 36) as usize;

    let json_end = HEADER_LEN + json_len;
    if bytes.len() < json_end {
        return Err(Error::Truncated {
            what: "metadata",
            expected: json_len,
            found: bytes.len() - HEADER_LEN,
        });
    }
    let meta: Metadata = serde_json::from_slice(&bytes[HEADER_LEN..json_end])?;

    let mismatch = |what: &str, header: usize, json: usize| {
        Error::PayloadMismatch(format!("header {what} = {header}, metadata says {json}"))
    };
    if meta.geometry.len() != m {
        return Err(mismatch("M", m, meta.geometry.len()));
    }
    if meta.grid.len() != l {
        return Err(mismatch("L", l, meta.grid.len()));
    }
    if meta.bins.len() != f {
        return Err(mismatch("F", f, meta.bins.len()));
    }
    if BuilderId::from_code(builder_code) != Some(meta.builder) {
        return Err(Error::PayloadMismatch(format!(
            "header builder id {builder_code} disagrees with metadata {:?}",
            meta.builder
        )));
    }
    if meta.radius_m.unwrap_or(0.0).to_bits() != radius.to_bits() {
        return Err(Error::PayloadMismatch(format!(
            "header radius {radius} disagrees with metadata {:?}",
            meta.radius_m
        )));
    }

    let expected = f
        .checked_mul(l)
        .and_then(|n| n.checked_mul(m))
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::PayloadMismatch("header dimensions overflow".into()))?;
    let payload = &bytes[json_end..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            what: "payload",
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::PayloadMismatch(format!(
            "{} trailing bytes after the {expected}-byte payload",
            payload.len() - expected
        )));
    }
    let tensor = payload
        .chunks_exact(8)
        .map(|c| {
            Complex32::new(
                f32::from_le_bytes(c[..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..].try_into().unwrap()),
            )
        })
        .collect();

    let freqs = FrequencyGrid::with_speed_of_sound(sample_rate, fft_size, meta.speed_of_sound)?;
    DeviceDictionary::from_tensor(
        meta.geometry,
        meta.grid,
        freqs,
        meta.bins,
        tensor,
        DictionaryMetadata {
            device_name: meta.device_name,
            builder: meta.builder,
            p0: meta.p0,
            radius_m: meta.radius_m,
        },
    )
}

pub fn save_dictionary(dict: &DeviceDictionary, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_dictionary(dict, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<DeviceDictionary> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_rigid_sphere, SphereSpec};

    fn sample() -> DeviceDictionary {
        let f = FrequencyGrid::new(16_000, 256).unwrap();
        build_rigid_sphere(
            &SphereSpec::fibonacci(6, 0.04).unwrap(),
            &DirectionGrid::equiangular(45.0).unwrap(),
            &f,
            &[0, 3, 17, 128],
        )
        .unwrap()
    }

    fn encoded() -> Vec<u8> {
        let mut buf = Vec::new();
        write_dictionary(&sample(), &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_exact() {
        let d = sample();
        let back = decode(&encoded()).unwrap();
        assert_eq!(back, d);
        let bits = |t: &[Complex32]| {
            t.iter()
                .map(|c| (c.re.to_bits(), c.im.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(back.tensor()), bits(d.tensor()));
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.wfd");
        save_dictionary(&sample(), &p).unwrap();
        assert_eq!(load_dictionary(&p).unwrap(), sample());
    }

    #[test]
    fn bad_magic() {
        let mut b = encoded();
        b[0] = b'X';
        assert!(matches!(decode(&b), Err(Error::Format(_))));
    }

    #[test]
    fn version_mismatch() {
        let mut b = encoded();
        b[3] = b'2';
        assert!(matches!(
            decode(&b),
            Err(Error::Version {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn truncated_payload() {
        let b = encoded();
        assert!(matches!(
            decode(&b[..b.len() - 5]),
            Err(Error::Truncated {
                what: "payload",
                ..
            })
        ));
        assert!(matches!(
            decode(&b[..20]),
            Err(Error::Truncated { what: "header", .. })
        ));
        assert!(matches!(
            decode(&b[..60]),
            Err(Error::Truncated {
                what: "metadata",
                ..
            })
        ));
    }

    #[test]
    fn header_payload_mismatch() {
        let mut b = encoded();
        b.extend_from_slice(&[0; 8]);
        assert!(matches!(decode(&b), Err(Error::PayloadMismatch(_))));

        let mut b = encoded();
        b[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(decode(&b), Err(Error::PayloadMismatch(_))));
    }
}
