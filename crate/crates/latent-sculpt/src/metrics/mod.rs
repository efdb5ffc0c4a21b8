//! Latent-space evaluation: the unsupervised predictability score (LPS),
//! covariance diagonality ratio, normalized reconstruction error, the
//! mutual information gap against known factors, and distribution-report
//! artifacts.

mod lps;
mod mig;
mod report;

pub use lps::{lps_mlp, LpsReport, RegressorConfig};
pub use mig::{mig, DEFAULT_MIG_BINS};
pub use report::{distribution_report, write_metrics_csv, HIST_BINS};

use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::batch_stats;

/// Cap applied when the off-diagonal mass is (near) zero.
pub const COVARIANCE_RATIO_CAP: f64 = 1e12;

/// Sum of covariance diagonal over sum of absolute off-diagonal entries
/// (plus 1e-12); higher means more linearly decorrelated. Capped at 1e12.
pub fn covariance_ratio(z: &Tensor) -> Result<f64> {
    if z.rank() != 2 || z.shape()[1] < 2 {
        return Err(Error::Invalid(format!(
            "covariance ratio needs at least 2 latent dimensions, got shape {:?}",
            z.shape()
        )));
    }
    let stats = batch_stats(z)?;
    let d = stats.cov.shape()[0];
    let mut diag = 0.0;
    let mut off = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                diag += stats.cov.at(i, j);
            } else {
                off += stats.cov.at(i, j).abs();
            }
        }
    }
    Ok((diag / (off + 1e-12)).min(COVARIANCE_RATIO_CAP))
}

/// Reconstruction error normalized by signal energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nmse {
    pub linear: f64,
    /// 10 log10(linear); exactly zero error reports -inf.
    pub db: f64,
}

pub fn nmse(x: &Tensor, x_hat: &Tensor) -> Result<Nmse> {
    if x.shape() != x_hat.shape() {
        return Err(Error::shape("nmse", x.shape(), x_hat.shape()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in x.values().iter().zip(x_hat.values()) {
        num += (a - b) * (a - b);
        den += a * a;
    }
    if den <= 0.0 {
        return Err(Error::Invalid(
            "nmse reference set has zero energy".to_string(),
        ));
    }
    let linear = num / den;
    let db = if linear == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * linear.log10()
    };
    Ok(Nmse { linear, db })
}

/// Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b| over the
/// empirical CDFs. Used to compare per-dimension latent marginals.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EstimatorUndefined(
            "KS statistic needs non-empty samples on both sides".to_string(),
        ));
    }
    let sort = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(|x, y| x.partial_cmp(y).expect("finite samples"));
        v
    };
    let (sa, sb) = (sort(a), sort(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let t = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= t {
            i += 1;
        }
        while j < sb.len() && sb[j] <= t {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}
