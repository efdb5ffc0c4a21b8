//! RBF kernel mixtures with adaptive bandwidth.
//!
//! A kernel matrix entry is the unweighted sum over mixture components
//! k_c(a,b) = exp(-||a-b||^2 / (2 (c * sigma_base)^2)), with sigma_base
//! either fixed or resolved per batch pair by the median heuristic: the
//! median Euclidean distance over all unordered pairs of the combined set.

use serde::{Deserialize, Serialize};

use crate::diffcore::{gemm::matmul_acc, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Per-call bandwidth: median pairwise distance of the combined batches.
    #[default]
    MedianHeuristic,
    /// Fixed positive base bandwidth.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default)]
    pub bandwidth: BandwidthPolicy,
    #[serde(default = "default_multipliers")]
    pub multipliers: Vec<f64>,
}

fn default_multipliers() -> Vec<f64> {
    DEFAULT_MULTIPLIERS.to_vec()
}

pub const DEFAULT_MULTIPLIERS: [f64; 3] = [0.5, 1.0, 2.0];

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::median_heuristic()
    }
}

impl KernelSpec {
    pub fn new(bandwidth: BandwidthPolicy, multipliers: Vec<f64>) -> Result<Self> {
        if multipliers.is_empty() {
            return Err(Error::config("kernel.multipliers", "must be non-empty"));
        }
        if let Some(bad) = multipliers.iter().find(|&&c| !(c > 0.0)) {
            return Err(Error::config(
                "kernel.multipliers",
                format!("must all be > 0, got {bad}"),
            ));
        }
        if let BandwidthPolicy::Fixed(s) = bandwidth {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::config(
                    "kernel.sigma_base",
                    format!("must be a positive finite number, got {s}"),
                ));
            }
        }
        Ok(KernelSpec {
            bandwidth,
            multipliers,
        })
    }

    pub fn median_heuristic() -> Self {
        KernelSpec {
            bandwidth: BandwidthPolicy::MedianHeuristic,
            multipliers: DEFAULT_MULTIPLIERS.to_vec(),
        }
    }

    pub fn fixed(sigma_base: f64) -> Result<Self> {
        KernelSpec::new(
            BandwidthPolicy::Fixed(sigma_base),
            DEFAULT_MULTIPLIERS.to_vec(),
        )
    }

    /// Re-checks the constructor invariants; needed after deserializing.
    pub fn validate(&self) -> Result<()> {
        KernelSpec::new(self.bandwidth, self.multipliers.clone()).map(|_| ())
    }

    /// Base bandwidth for this batch pair: the fixed value, or the median
    /// heuristic evaluated on the combined set.
    pub fn resolve_sigma(&self, z: &Tensor, z_prime: &Tensor) -> Result<f64> {
        match self.bandwidth {
            BandwidthPolicy::Fixed(s) => Ok(s),
            BandwidthPolicy::MedianHeuristic => median_heuristic_bandwidth(z, z_prime),
        }
    }
}

fn check_points(context: &'static str, a: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1] {
        return Err(Error::shape(context, a.shape(), b.shape()));
    }
    Ok((a.shape()[0], b.shape()[0], a.shape()[1]))
}

/// Median Euclidean distance over all unordered pairs of the combined set
/// z ∪ z′ (self-pairs excluded). Returns the fallback 1.0 when every pair
/// coincides; errors when the combined set has fewer than 2 points.
pub fn median_heuristic_bandwidth(z: &Tensor, z_prime: &Tensor) -> Result<f64> {
    let (m, n, d) = check_points("median_heuristic_bandwidth", z, z_prime)?;
    let total = m + n;
    if total < 2 {
        return Err(Error::EstimatorUndefined(format!(
            "median heuristic needs at least 2 combined points, got {total}"
        )));
    }
    let mut points = Vec::with_capacity(total * d);
    points.extend_from_slice(z.values());
    points.extend_from_slice(z_prime.values());
    let mut dists = Vec::with_capacity(total * (total - 1) / 2);
    for i in 0..total {
        let pi = &points[i * d..(i + 1) * d];
        for j in i + 1..total {
            let pj = &points[j * d..(j + 1) * d];
            let sq: f64 = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum();
            dists.push(sq.sqrt());
        }
    }
    if dists.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite {
            context: "median heuristic distances",
        });
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let k = dists.len();
    let median = if k % 2 == 1 {
        dists[k / 2]
    } else {
        0.5 * (dists[k / 2 - 1] + dists[k / 2])
    };
    Ok(if median == 0.0 { 1.0 } else { median })
}

/// Squared Euclidean distances between all row pairs, clamped at 0. When
/// `a` and `b` are the same tensor the diagonal is exactly 0.
pub(crate) fn pairwise_sq_dists(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, n, d) = check_points("pairwise_sq_dists", a, b)?;
    let same = std::ptr::eq(a, b);
    let av = a.values();
    let bv = b.values();
    let mut out = vec![0.0; m * n];
    matmul_acc(av, bv, &mut out, m, d, n, false, true, -2.0);
    let a_norm: Vec<f64> = (0..m)
        .map(|i| av[i * d..(i + 1) * d].iter().map(|x| x * x).sum())
        .collect();
    let b_norm: Vec<f64> = (0..n)
        .map(|j| bv[j * d..(j + 1) * d].iter().map(|x| x * x).sum())
        .collect();
    for i in 0..m {
        for j in 0..n {
            let idx = i * n + j;
            let raw = out[idx] + a_norm[i] + b_norm[j];
            out[idx] = if raw <= 0.0 || (same && i == j) { 0.0 } else { raw };
        }
    }
    Tensor::new(vec![m, n], out)
}

fn check_sigma(sigma_base: f64) -> Result<()> {
    if !(sigma_base > 0.0) || !sigma_base.is_finite() {
        return Err(Error::config(
            "sigma_base",
            format!("must be a positive finite number, got {sigma_base}"),
        ));
    }
    Ok(())
}

/// K(i,j) = sum over multipliers c of exp(-||a_i - b_j||^2 / (2 (c sigma)^2)).
pub fn kernel_matrix(a: &Tensor, b: &Tensor, spec: &KernelSpec, sigma_base: f64) -> Result<Tensor> {
    check_sigma(sigma_base)?;
    let sq = pairwise_sq_dists(a, b)?;
    let mut out = vec![0.0; sq.len()];
    for &c in &spec.multipliers {
        let inv = -1.0 / (2.0 * (c * sigma_base) * (c * sigma_base));
        for (o, &d2) in out.iter_mut().zip(sq.values()) {
            *o += (inv * d2).exp();
        }
    }
    Tensor::new(sq.shape().to_vec(), out)
}

/// Tape variant of [`kernel_matrix`]; gradients flow through the pairwise
/// distances while the bandwidth stays a constant.
pub fn kernel_matrix_on_tape(
    tape: &mut Tape,
    a: Var,
    b: Var,
    spec: &KernelSpec,
    sigma_base: f64,
) -> Result<Var> {
    check_sigma(sigma_base)?;
    let sq = tape.pairwise_sq_dists(a, b)?;
    let mut acc: Option<Var> = None;
    for &c in &spec.multipliers {
        let inv = -1.0 / (2.0 * (c * sigma_base) * (c * sigma_base));
        let scaled = tape.scale(sq, inv)?;
        let k = tape.exp(scaled)?;
        acc = Some(match acc {
            None => k,
            Some(prev) => tape.add(prev, k)?,
        });
    }
    Ok(acc.expect("multipliers validated non-empty"))
}
