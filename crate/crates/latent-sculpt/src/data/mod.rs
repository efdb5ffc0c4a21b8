//! Datasets and binary formats: procedural XY-family image generators,
//! IDX ingestion, and the latent-dump container.

mod dump;
mod idx;
mod xy;

pub use dump::{read_latent_dump, write_latent_dump};
pub use idx::{parse_idx, write_idx};
pub use xy::{generate_xy_family, XyVariant};

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// A batch of grayscale images, each flattened row-major to h*w pixels
/// in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBatch {
    h: usize,
    w: usize,
    data: Tensor,
}

impl ImageBatch {
    pub fn new(h: usize, w: usize, data: Tensor) -> Result<Self> {
        if data.rank() != 2 || data.shape()[1] != h * w {
            return Err(Error::Invalid(format!(
                "image batch needs shape [n, {}] for {h}x{w} pixels, got {:?}",
                h * w,
                data.shape()
            )));
        }
        if let Some(bad) = data.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(ImageBatch { h, w, data })
    }

    pub fn n(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// Pixel matrix, n x (h*w): the model-facing view.
    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn image(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    /// Batch restricted to the given sample indices (rows are copied).
    pub fn select(&self, indices: &[usize]) -> ImageBatch {
        let px = self.h * self.w;
        let mut vals = Vec::with_capacity(indices.len() * px);
        for &i in indices {
            vals.extend_from_slice(self.data.row(i));
        }
        ImageBatch {
            h: self.h,
            w: self.w,
            data: Tensor::new(vec![indices.len(), px], vals).expect("selection preserves width"),
        }
    }
}

/// Ground-truth generative factors, one row per sample, each factor
/// normalized to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    names: Vec<String>,
    data: Tensor,
}

impl FactorTable {
    pub fn new(names: Vec<String>, data: Tensor) -> Result<Self> {
        if data.rank() != 2 || data.shape()[1] != names.len() {
            return Err(Error::Invalid(format!(
                "factor table needs shape [n, {}], got {:?}",
                names.len(),
                data.shape()
            )));
        }
        if let Some(bad) = data.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!(
                "factor value {bad} outside [0, 1]"
            )));
        }
        Ok(FactorTable { names, data })
    }

    pub fn n(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.data.at(i, j)).collect()
    }

    /// CSV with a header row of factor names.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&self.names.join(","));
        out.push('\n');
        for i in 0..self.n() {
            let row: Vec<String> = self.data.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Where training images come from: a seeded procedural XY-family draw,
/// or an IDX file on disk (optionally truncated to the first `limit`
/// images). Only procedural datasets carry a factor table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    Xy {
        variant: XyVariant,
        n: usize,
        resolution: usize,
    },
    Idx {
        images: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
    },
}

impl DatasetSpec {
    /// Materializes the dataset. Relative IDX paths resolve against
    /// `base_dir`; `seed` drives procedural generation only.
    pub fn load(&self, base_dir: &Path, seed: u64) -> Result<(ImageBatch, Option<FactorTable>)> {
        match self {
            DatasetSpec::Xy {
                variant,
                n,
                resolution,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (images, factors) = generate_xy_family(*variant, *n, *resolution, &mut rng)?;
                Ok((images, Some(factors)))
            }
            DatasetSpec::Idx { images, limit } => {
                let path = if images.is_absolute() {
                    images.clone()
                } else {
                    base_dir.join(images)
                };
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                let batch = parse_idx(&bytes)?;
                let batch = match limit {
                    Some(k) if *k < batch.n() => batch.select(&(0..*k).collect::<Vec<_>>()),
                    _ => batch,
                };
                Ok((batch, None))
            }
        }
    }
}
