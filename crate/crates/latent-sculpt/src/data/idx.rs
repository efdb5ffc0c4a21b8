//! IDX image-file ingestion (the MNIST container format).
//!
//! Only the unsigned-byte rank-3 layout is supported: magic
//! 0x00 0x00 0x08 0x03, three big-endian u32 dimension sizes (count,
//! rows, columns), then count*rows*cols raw bytes. Pixels are scaled
//! to [0, 1] by dividing by 255.

use super::ImageBatch;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

const MAGIC: [u8; 4] = [0x00, 0x00, 0x08, 0x03];
const HEADER: usize = 16;

pub fn parse_idx(bytes: &[u8]) -> Result<ImageBatch> {
    if bytes.len() < HEADER {
        return Err(Error::format(
            "idx",
            format!("header needs {HEADER} bytes, file has {}", bytes.len()),
        ));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::format(
            "idx",
            format!(
                "bad magic {:02x?} at offset 0, expected {MAGIC:02x?} (unsigned-byte rank-3 images)",
                &bytes[..4]
            ),
        ));
    }
    let dim = |i: usize| {
        u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize
    };
    let (n, h, w) = (dim(0), dim(1), dim(2));
    let expect = n
        .checked_mul(h)
        .and_then(|p| p.checked_mul(w))
        .ok_or_else(|| {
            Error::format("idx", format!("declared dims {n}x{h}x{w} overflow"))
        })?;
    let payload = &bytes[HEADER..];
    if payload.len() != expect {
        return Err(Error::format(
            "idx",
            format!(
                "payload needs {expect} bytes for {n}x{h}x{w}, got {} (offset {HEADER})",
                payload.len()
            ),
        ));
    }
    let values: Vec<f64> = payload.iter().map(|&b| b as f64 / 255.0).collect();
    ImageBatch::new(h, w, Tensor::new(vec![n, h * w], values)?)
}

/// Serializes a batch back to IDX bytes; pixel values are quantized to the
/// nearest of the 256 byte levels.
pub fn write_idx(images: &ImageBatch) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + images.data().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(images.n() as u32).to_be_bytes());
    out.extend_from_slice(&(images.h() as u32).to_be_bytes());
    out.extend_from_slice(&(images.w() as u32).to_be_bytes());
    out.extend(
        images
            .data()
            .values()
            .iter()
            .map(|&v| (v * 255.0).round() as u8),
    );
    out
}
