//! `.rir` transfer-function files: `"RIR1"`, a `u32` LE JSON header length,
//! the JSON header, then `bins × channels` pairs of `f32` LE (re, im).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::TransferFunction;
use crate::error::{Error, Result};

const MAGIC: &[u8; 3] = b"RIR";
const VERSION: u8 = b'1';

#[derive(Serialize, Deserialize)]
struct Header {
    fft_size: usize,
    sample_rate: u32,
    channels: usize,
    reliable: Vec<bool>,
}

pub fn write_transfer_function<W: Write>(tf: &TransferFunction, mut w: W) -> Result<()> {
    let json = serde_json::to_vec(&Header {
        fft_size: tf.fft_size,
        sample_rate: tf.sample_rate,
        channels: tf.channels,
        reliable: tf.reliable.clone(),
    })?;
    let mut out = Vec::with_capacity(8 + json.len() + tf.h.len() * 8);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for c in &tf.h {
        out.extend_from_slice(&(c.re as f32).to_le_bytes());
        out.extend_from_slice(&(c.im as f32).to_le_bytes());
    }
    w.write_all(&out)?;
    Ok(())
}

pub fn read_transfer_function<R: Read>(mut r: R) -> Result<TransferFunction> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<TransferFunction> {
    if bytes.len() < 4 || &bytes[..3] != MAGIC {
        return Err(Error::Format("missing RIR magic".into()));
    }
    if bytes[3] != VERSION {
        if !bytes[3].is_ascii_digit() {
            return Err(Error::Format("missing RIR version digit".into()));
        }
        return Err(Error::Version {
            found: bytes[3] - b'0',
            expected: VERSION - b'0',
        });
    }
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            what: "header",
            expected: 8,
            found: bytes.len(),
        });
    }
    let json_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let rest = &bytes[8..];
    if rest.len() < json_len {
        return Err(Error::Truncated {
            what: "header",
            expected: json_len,
            found: rest.len(),
        });
    }
    let header: Header = serde_json::from_slice(&rest[..json_len])?;
    let payload = &rest[json_len..];
    let expected = header
        .reliable
        .len()
        .checked_mul(header.channels)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::PayloadMismatch("header dimensions overflow".into()))?;
    if payload.len() < expected {
        return Err(Error::Truncated {
            what: "payload",
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::PayloadMismatch(format!(
            "{} trailing bytes after the payload",
            payload.len() - expected
        )));
    }
    let h = payload
        .chunks_exact(8)
        .map(|c| {
            Complex64::new(
                f32::from_le_bytes(c[..4].try_into().unwrap()) as f64,
                f32::from_le_bytes(c[4..].try_into().unwrap()) as f64,
            )
        })
        .collect();
    TransferFunction::new(
        header.fft_size,
        header.sample_rate,
        header.channels,
        h,
        header.reliable,
    )
    .map_err(|e| Error::PayloadMismatch(e.to_string()))
}

pub fn save_transfer_function(tf: &TransferFunction, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_transfer_function(tf, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_transfer_function(path: impl AsRef<Path>) -> Result<TransferFunction> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TransferFunction {
        let h = (0..9 * 2)
            .map(|i| Complex64::new(i as f32 as f64 * 0.5, -(i as f64)))
            .collect();
        let mut reliable = vec![true; 9];
        reliable[8] = false;
        TransferFunction::new(16, 8000, 2, h, reliable).unwrap()
    }

    #[test]
    fn round_trip() {
        let mut b = Vec::new();
        write_transfer_function(&sample(), &mut b).unwrap();
        assert_eq!(decode(&b).unwrap(), sample());
    }

    #[test]
    fn corrupt_files() {
        let mut b = Vec::new();
        write_transfer_function(&sample(), &mut b).unwrap();
        assert!(matches!(decode(b"XYZ1"), Err(Error::Format(_))));
        let mut v = b.clone();
        v[3] = b'4';
        assert!(matches!(decode(&v), Err(Error::Version { found: 4, .. })));
        assert!(matches!(
            decode(&b[..b.len() - 1]),
            Err(Error::Truncated {
                what: "payload",
                ..
            })
        ));
        let mut v = b.clone();
        v.extend_from_slice(&[1, 2]);
        assert!(matches!(decode(&v), Err(Error::PayloadMismatch(_))));
    }
}
