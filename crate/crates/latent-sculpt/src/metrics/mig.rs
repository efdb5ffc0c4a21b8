//! Mutual information gap: for each ground-truth factor, the normalized
//! difference between the highest and second-highest mutual information
//! with any latent dimension. Latents and factors are discretized into
//! equal-frequency bins; MI is estimated from the joint histogram.

use crate::data::FactorTable;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_MIG_BINS: usize = 20;

/// Equal-frequency discretization: bin edges at the k/bins quantiles of
/// the sorted values, ties kept in one bin. Returns bin ids < bins.
fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let edges: Vec<f64> = (1..bins).map(|k| sorted[k * n / bins]).collect();
    x.iter()
        .map(|v| edges.partition_point(|e| e <= v))
        .collect()
}

fn entropy(ids: &[usize], bins: usize) -> f64 {
    let mut counts = vec![0usize; bins];
    for &b in ids {
        counts[b] += 1;
    }
    let n = ids.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut ma = vec![0usize; bins];
    let mut mb = vec![0usize; bins];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * bins + j] += 1;
        ma[i] += 1;
        mb[j] += 1;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c == 0 {
                continue;
            }
            let p = c as f64 / n;
            let pa = ma[i] as f64 / n;
            let pb = mb[j] as f64 / n;
            mi += p * (p / (pa * pb)).ln();
        }
    }
    mi
}

/// Mean over factors of (top MI - second MI) / H(factor). Factors with
/// zero entropy (constant columns) are skipped with a warning.
pub fn mig(z: &Tensor, factors: &FactorTable, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::config("mig.bins", format!("needs at least 2 bins, got {bins}")));
    }
    if z.rank() != 2 || z.shape()[1] < 2 {
        return Err(Error::Invalid(format!(
            "mutual information gap needs at least 2 latent dimensions, got shape {:?}",
            z.shape()
        )));
    }
    let (n, d) = (z.shape()[0], z.shape()[1]);
    if factors.n() != n {
        return Err(Error::shape("mig rows", &[n], &[factors.n()]));
    }
    if n < bins {
        return Err(Error::Invalid(format!(
            "mutual information gap needs at least bins={bins} samples, got {n}"
        )));
    }

    let latent_ids: Vec<Vec<usize>> = (0..d)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| z.at(i, j)).collect();
            equal_frequency_bins(&col, bins)
        })
        .collect();

    let mut gaps = Vec::new();
    for (name, col) in factors.names().iter().zip(0..factors.names().len()) {
        let v = factors.column(col);
        let v_ids = equal_frequency_bins(&v, bins);
        let h = entropy(&v_ids, bins);
        if h < 1e-12 {
            log::warn!("factor '{name}' is constant (zero entropy); skipped in MIG");
            continue;
        }
        let mut mis: Vec<f64> = latent_ids
            .iter()
            .map(|ids| mutual_information(ids, &v_ids, bins))
            .collect();
        mis.sort_by(|a, b| b.partial_cmp(a).expect("finite MI"));
        gaps.push((mis[0] - mis[1]) / h);
    }
    if gaps.is_empty() {
        return Err(Error::Invalid(
            "all factor columns are constant; MIG undefined".to_string(),
        ));
    }
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}
