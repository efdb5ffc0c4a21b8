//! Latent-dump binary container.
//!
//! Layout: magic "LTNT", version u32 = 1, n u32, d u32, then n*d 32-bit
//! floats, row-major. All integers and floats are little-endian. An empty
//! dump (n = 0) is a valid 16-byte file.

use std::path::Path;

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

const MAGIC: [u8; 4] = *b"LTNT";
const VERSION: u32 = 1;
const HEADER: usize = 16;

/// Writes an n x d latent batch. Values are narrowed to f32.
pub fn write_latent_dump(path: &Path, latents: &Tensor) -> Result<()> {
    if latents.rank() != 2 {
        return Err(Error::Invalid(format!(
            "latent dump needs a rank-2 batch, got shape {:?}",
            latents.shape()
        )));
    }
    if let Some(bad) = latents.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!(
            "latent dump values must be finite, got {bad}"
        )));
    }
    let (n, d) = (latents.shape()[0], latents.shape()[1]);
    let mut bytes = Vec::with_capacity(HEADER + 4 * n * d);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(n as u32).to_le_bytes());
    bytes.extend_from_slice(&(d as u32).to_le_bytes());
    for &v in latents.values() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a dump back as an n x d tensor (f32 payload widened to f64).
pub fn read_latent_dump(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER {
        return Err(Error::format(
            "latent dump",
            format!("header needs {HEADER} bytes, file has {}", bytes.len()),
        ));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::format(
            "latent dump",
            format!("bad magic {:02x?} at offset 0, expected \"LTNT\"", &bytes[..4]),
        ));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != VERSION {
        return Err(Error::format(
            "latent dump",
            format!("unsupported version {version} at offset 4, expected {VERSION}"),
        ));
    }
    let (n, d) = (word(8) as usize, word(12) as usize);
    let expect = n
        .checked_mul(d)
        .and_then(|e| e.checked_mul(4))
        .ok_or_else(|| Error::format("latent dump", format!("declared {n}x{d} overflows")))?;
    let payload = &bytes[HEADER..];
    if payload.len() != expect {
        return Err(Error::format(
            "latent dump",
            format!(
                "header declares {n}x{d} ({expect} payload bytes) but {} bytes follow offset {HEADER}",
                payload.len()
            ),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Tensor::new(vec![n, d], values)
}
