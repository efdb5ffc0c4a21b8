//! XY-family synthetic image generators.
//!
//! Grayscale images of one filled shape on a black background. The base XY
//! variant varies center position only; XYC adds a fill intensity drawn
//! from [0.25, 1.0]; XYCS additionally picks circle or square equiprobably.
//! Shape radius is resolution/8 and centers stay far enough from the border
//! that the shape is always fully inside. Edges are anti-aliased by pixel
//! coverage so images vary continuously with the center. All factors are
//! recorded normalized to [0, 1] in draw order: x, y, then color, then
//! shape.

use rand::{Rng, RngExt};

use super::{FactorTable, ImageBatch};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum XyVariant {
    Xy,
    Xyc,
    Xycs,
}

impl XyVariant {
    pub fn factor_names(self) -> &'static [&'static str] {
        match self {
            XyVariant::Xy => &["x", "y"],
            XyVariant::Xyc => &["x", "y", "color"],
            XyVariant::Xycs => &["x", "y", "color", "shape"],
        }
    }

    pub fn factor_count(self) -> usize {
        self.factor_names().len()
    }
}

impl std::str::FromStr for XyVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "XY" => Ok(XyVariant::Xy),
            "XYC" => Ok(XyVariant::Xyc),
            "XYCS" => Ok(XyVariant::Xycs),
            other => Err(Error::config(
                "dataset.variant",
                format!("unknown variant `{other}`, expected XY, XYC or XYCS"),
            )),
        }
    }
}

impl std::fmt::Display for XyVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            XyVariant::Xy => "XY",
            XyVariant::Xyc => "XYC",
            XyVariant::Xycs => "XYCS",
        })
    }
}

#[derive(Clone, Copy)]
enum Shape {
    Circle,
    Square,
}

/// Rasterizes one filled shape into a resolution^2 pixel buffer.
///
/// Edge pixels get fractional intensity from their coverage, so the image
/// is a continuous function of the real-valued center and sub-pixel
/// position is never aliased away. Squares use the exact overlap of the
/// unit pixel cell with the shape; circles use a one-pixel linear ramp
/// across the rim, which matches the exact coverage to within ~1%.
fn raster(res: usize, shape: Shape, cx: f64, cy: f64, r: f64, intensity: f64) -> Vec<f64> {
    let mut px = vec![0.0; res * res];
    // lit pixels lie within half a pixel of the shape boundary
    let x_lo = (cx - r - 0.5).floor().max(0.0) as usize;
    let x_hi = ((cx + r + 0.5).ceil() as usize).min(res - 1);
    let y_lo = (cy - r - 0.5).floor().max(0.0) as usize;
    let y_hi = ((cy + r + 0.5).ceil() as usize).min(res - 1);
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let coverage = match shape {
                Shape::Circle => {
                    let dist = (dx * dx + dy * dy).sqrt();
                    (r - dist + 0.5).clamp(0.0, 1.0)
                }
                Shape::Square => {
                    let ox = (r - dx.abs() + 0.5).clamp(0.0, 1.0);
                    let oy = (r - dy.abs() + 0.5).clamp(0.0, 1.0);
                    ox * oy
                }
            };
            px[y * res + x] = intensity * coverage;
        }
    }
    px
}

/// Generates `n` images at `resolution`^2 pixels plus their ground-truth
/// factor table. Factors are drawn per sample in a fixed order, so a fixed
/// rng seed reproduces the dataset bit for bit.
pub fn generate_xy_family<R: Rng>(
    variant: XyVariant,
    n: usize,
    resolution: usize,
    rng: &mut R,
) -> Result<(ImageBatch, FactorTable)> {
    if resolution < 16 {
        return Err(Error::config(
            "dataset.resolution",
            format!("must be at least 16 pixels to fit the shape, got {resolution}"),
        ));
    }
    if n < 1 {
        return Err(Error::config("dataset.n", "must be at least 1"));
    }
    let res = resolution;
    let r = res as f64 / 8.0;
    // valid center range keeps the whole shape inside the image
    let (lo, hi) = (r, res as f64 - 1.0 - r);
    let span = hi - lo;

    let mut pixels = Vec::with_capacity(n * res * res);
    let mut factors = Vec::with_capacity(n * variant.factor_count());
    for _ in 0..n {
        let cx = rng.random_range(lo..=hi);
        let cy = rng.random_range(lo..=hi);
        let intensity = match variant {
            XyVariant::Xy => 1.0,
            _ => rng.random_range(0.25..=1.0),
        };
        let shape = match variant {
            XyVariant::Xycs => {
                if rng.random::<f64>() < 0.5 {
                    Shape::Circle
                } else {
                    Shape::Square
                }
            }
            _ => Shape::Circle,
        };
        pixels.extend_from_slice(&raster(res, shape, cx, cy, r, intensity));
        factors.push((cx - lo) / span);
        factors.push((cy - lo) / span);
        if !matches!(variant, XyVariant::Xy) {
            factors.push((intensity - 0.25) / 0.75);
        }
        if matches!(variant, XyVariant::Xycs) {
            factors.push(match shape {
                Shape::Circle => 0.0,
                Shape::Square => 1.0,
            });
        }
    }
    let images = ImageBatch::new(res, res, Tensor::new(vec![n, res * res], pixels)?)?;
    let table = FactorTable::new(
        variant.factor_names().iter().map(|s| s.to_string()).collect(),
        Tensor::new(vec![n, variant.factor_count()], factors)?,
    )?;
    Ok((images, table))
}
