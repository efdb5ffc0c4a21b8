//! Latent predictability score: how well each latent dimension can be
//! regressed from the remaining ones on a held-out split. Near-zero mean
//! R-squared indicates mutually independent dimensions; values near 1
//! indicate redundant (entangled) dimensions. Lower is better.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffcore::{gemm::matmul_acc, Tape, Tensor};
use crate::error::{Error, Result};
use crate::opt::Adam;
use crate::seed;

/// MLP regressor hyperparameters; one regressor is fit per latent
/// dimension with these settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig {
            hidden: vec![64, 64],
            epochs: 200,
            lr: 1e-3,
            batch_size: 128,
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("regressor.hidden", "needs nonzero hidden widths"));
        }
        if self.epochs == 0 {
            return Err(Error::config("regressor.epochs", "must be at least 1"));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config("regressor.lr", "must be positive and finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("regressor.batch_size", "must be at least 1"));
        }
        Ok(())
    }

    /// Stable hex digest of the full regressor configuration, recorded in
    /// reports so scores are only compared across identical regressors.
    pub fn digest(&self) -> String {
        let canon = format!(
            "mlp-h{:?}-relu-adam-ep{}-lr{}-bs{}",
            self.hidden, self.epochs, self.lr, self.batch_size
        );
        format!("{:016x}", fnv1a64(canon.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpsReport {
    /// mean of `r2` (the score itself).
    pub lps: f64,
    /// held-out R-squared per latent dimension; <= 1, can be negative.
    pub r2: Vec<f64>,
    /// train-split R-squared per dimension (capacity diagnostic).
    pub r2_train: Vec<f64>,
    pub regressor_digest: String,
    pub split_seed: u64,
}

/// One dense relu network with an identity output head.
struct Mlp {
    layers: Vec<(Tensor, Tensor)>,
}

impl Mlp {
    fn new(widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let layers = widths
            .windows(2)
            .map(|io| {
                let (fi, fo) = (io[0], io[1]);
                let bound = 1.0 / (fi as f64).sqrt();
                let w = Tensor::new(
                    vec![fi, fo],
                    (0..fi * fo).map(|_| rng.random_range(-bound..bound)).collect(),
                )
                .expect("sized to shape");
                let b = Tensor::vector((0..fo).map(|_| rng.random_range(-bound..bound)).collect());
                (w, b)
            })
            .collect();
        Mlp { layers }
    }

    fn predict(&self, x: &Tensor) -> Vec<f64> {
        let n = x.shape()[0];
        let mut h = x.values().to_vec();
        let mut width = x.shape()[1];
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let fo = w.shape()[1];
            let mut out = vec![0.0; n * fo];
            matmul_acc(&h, w.values(), &mut out, n, width, fo, false, false, 1.0);
            let last = i + 1 == self.layers.len();
            for r in 0..n {
                for c in 0..fo {
                    let v = out[r * fo + c] + b.values()[c];
                    out[r * fo + c] = if last { v } else { v.max(0.0) };
                }
            }
            h = out;
            width = fo;
        }
        h
    }

    /// One Adam step on the squared error of a minibatch.
    fn train_step(&mut self, x: Tensor, y: Tensor, opt: &mut Adam) -> Result<()> {
        let mut tape = Tape::new();
        let vars: Vec<_> = self
            .layers
            .iter()
            .flat_map(|(w, b)| [tape.param(w.clone()), tape.param(b.clone())])
            .collect();
        let xv = tape.leaf(x);
        let yv = tape.leaf(y);
        let mut h = xv;
        for (i, pair) in vars.chunks(2).enumerate() {
            let lin = tape.matmul(h, pair[0])?;
            h = tape.add_row(lin, pair[1])?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h)?;
            }
        }
        let diff = tape.sub(h, yv)?;
        let sq = tape.square(diff)?;
        let loss = tape.mean(sq, None)?;
        tape.backward(loss)?;
        let grads: Vec<Vec<f64>> = vars
            .iter()
            .map(|&v| tape.grad(v).expect("trainable ancestor").to_vec())
            .collect();
        let mut params: Vec<&mut Tensor> = self
            .layers
            .iter_mut()
            .flat_map(|(w, b)| [w, b])
            .collect();
        opt.step(&mut params, &grads)
    }
}

/// Column-standardization transform fit on the train split.
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(rows: &[&[f64]]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .iter()
            .map(|s| (s / n).sqrt().max(1e-8))
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, rows: &[&[f64]]) -> Vec<f64> {
        rows.iter()
            .flat_map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.scale))
                    .map(|(v, (m, s))| (v - m) / s)
            })
            .collect()
    }
}

fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    if ss_tot < 1e-12 {
        return 0.0;
    }
    1.0 - ss_res / ss_tot
}

/// Fits one regressor per dimension (in parallel) mapping the other
/// dimensions to it, and averages the held-out R-squared. `split` is the
/// train fraction; inputs and target are standardized to train-split
/// moments before fitting and predictions are mapped back.
pub fn lps_mlp(z: &Tensor, cfg: &RegressorConfig, split: f64, seed: u64) -> Result<LpsReport> {
    cfg.validate()?;
    if z.rank() != 2 || z.shape()[1] < 2 {
        return Err(Error::Invalid(format!(
            "predictability score needs at least 2 latent dimensions, got shape {:?}",
            z.shape()
        )));
    }
    let (n, d) = (z.shape()[0], z.shape()[1]);
    if n < 100 {
        return Err(Error::Invalid(format!(
            "predictability score needs at least 100 samples for a stable split, got {n}"
        )));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::config("lps.split", format!("train fraction must be in (0,1), got {split}")));
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut split_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 0));
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = split_rng.random_range(0..=i);
        indices.swap(i, j);
    }
    let n_train = ((n as f64 * split).floor() as usize).clamp(1, n - 1);
    let (train_idx, test_idx) = indices.split_at(n_train);

    let fit_dim = |dim: usize| -> Result<(f64, f64)> {
        let inputs = |idx: &[usize]| -> Vec<Vec<f64>> {
            idx.iter()
                .map(|&r| {
                    let row = z.row(r);
                    row.iter()
                        .enumerate()
                        .filter(|(c, _)| *c != dim)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect()
        };
        let targets = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&r| z.row(r)[dim]).collect() };
        let y_train = targets(train_idx);
        let y_test = targets(test_idx);

        let test_mean = y_test.iter().sum::<f64>() / y_test.len() as f64;
        let test_var =
            y_test.iter().map(|v| (v - test_mean) * (v - test_mean)).sum::<f64>() / y_test.len() as f64;
        if test_var < 1e-12 {
            // constant target: R-squared is 0 by convention
            return Ok((0.0, 0.0));
        }

        let x_train = inputs(train_idx);
        let x_test = inputs(test_idx);
        let x_rows: Vec<&[f64]> = x_train.iter().map(|r| r.as_slice()).collect();
        let x_std = Standardizer::fit(&x_rows);
        let y_rows: Vec<&[f64]> = y_train.iter().map(std::slice::from_ref).collect();
        let y_std = Standardizer::fit(&y_rows);

        let xt = Tensor::new(vec![train_idx.len(), d - 1], x_std.apply(&x_rows))?;
        let yt = Tensor::new(vec![train_idx.len(), 1], y_std.apply(&y_rows))?;

        let mut widths = vec![d - 1];
        widths.extend_from_slice(&cfg.hidden);
        widths.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 1 + dim as u64));
        let mut mlp = Mlp::new(&widths, &mut rng);
        let sizes: Vec<usize> = mlp.layers.iter().flat_map(|(w, b)| [w.len(), b.len()]).collect();
        let mut opt = Adam::new(cfg.lr, &sizes)?;

        let nt = train_idx.len();
        let mut order: Vec<usize> = (0..nt).collect();
        for _ in 0..cfg.epochs {
            for i in (1..nt).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(cfg.batch_size) {
                let bx = Tensor::new(
                    vec![chunk.len(), d - 1],
                    chunk.iter().flat_map(|&r| xt.row(r).to_vec()).collect(),
                )?;
                let by = Tensor::new(
                    vec![chunk.len(), 1],
                    chunk.iter().map(|&r| yt.row(r)[0]).collect(),
                )?;
                mlp.train_step(bx, by, &mut opt)?;
            }
        }

        let unscale = |p: Vec<f64>| -> Vec<f64> {
            p.iter().map(|v| v * y_std.scale[0] + y_std.mean[0]).collect()
        };
        let pred_train = unscale(mlp.predict(&xt));
        let test_rows: Vec<&[f64]> = x_test.iter().map(|r| r.as_slice()).collect();
        let xte = Tensor::new(vec![test_idx.len(), d - 1], x_std.apply(&test_rows))?;
        let pred_test = unscale(mlp.predict(&xte));
        Ok((r_squared(&y_test, &pred_test), r_squared(&y_train, &pred_train)))
    };

    let per_dim: Vec<(f64, f64)> = (0..d)
        .into_par_iter()
        .map(fit_dim)
        .collect::<Result<Vec<_>>>()?;
    let r2: Vec<f64> = per_dim.iter().map(|p| p.0).collect();
    let r2_train: Vec<f64> = per_dim.iter().map(|p| p.1).collect();
    let lps = r2.iter().sum::<f64>() / d as f64;
    Ok(LpsReport {
        lps,
        r2,
        r2_train,
        regressor_digest: cfg.digest(),
        split_seed: seed,
    })
}
