//! Training loop and post-training evaluation: seeded shuffled
//! mini-batches, one Adam step per batch with a fresh prior draw, a
//! divergence guard, periodic checkpoints, and a metrics block combining
//! reconstruction, decorrelation, predictability, and prior alignment.

use std::path::Path;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetSpec, FactorTable, ImageBatch};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::metrics::{
    covariance_ratio, distribution_report, lps_mlp, mig, nmse, write_metrics_csv, RegressorConfig,
    DEFAULT_MIG_BINS,
};
use crate::mmd::{mmd2_biased, Estimator};
use crate::models::{
    mse, save_checkpoint, total_loss, ModelParams, Regularizer,
};
use crate::opt::Adam;
use crate::priors::{sample_prior, PriorConfig, PriorSpec};
use crate::seed::{self, streams};

fn default_lambda() -> f64 {
    0.3
}
fn default_batch_size() -> usize {
    512
}
fn default_lr() -> f64 {
    5e-4
}
fn default_hidden() -> Vec<usize> {
    vec![256, 64]
}
fn default_regularizer() -> Regularizer {
    Regularizer::Mmd
}

/// Full recipe for one training run. The dataset and prior are carried as
/// specs; `materialize` turns them into data before calling `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    pub epochs: usize,
    #[serde(default = "default_regularizer")]
    pub regularizer: Regularizer,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub dataset: DatasetSpec,
    pub prior: PriorConfig,
    /// extra checkpoint every K epochs; 0 means final checkpoint only.
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::config("train.lambda", format!("must be nonnegative and finite, got {}", self.lambda)));
        }
        if self.batch_size < 2 {
            return Err(Error::config("train.batch_size", format!("must be at least 2, got {}", self.batch_size)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config("train.lr", format!("must be positive and finite, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be at least 1"));
        }
        if self.latent_dim == 0 {
            return Err(Error::config("train.latent_dim", "must be at least 1"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("train.hidden", "layer widths must be at least 1"));
        }
        self.kernel.validate()?;
        self.prior.validate()?;
        Ok(())
    }
}

/// Loads the dataset and resolves the prior, deriving the data seed from
/// the root seed. Relative paths resolve against `base_dir`.
pub fn materialize(
    cfg: &TrainConfig,
    base_dir: &Path,
) -> Result<(ImageBatch, Option<FactorTable>, PriorSpec)> {
    let (images, factors) = cfg
        .dataset
        .load(base_dir, seed::derive(cfg.seed, streams::DATA))?;
    let prior = cfg.prior.resolve(base_dir)?;
    Ok((images, factors, prior))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// mean reconstruction MSE over the epoch's steps.
    pub recon: f64,
    /// mean penalty value over the epoch's steps (0 when unregularized).
    pub penalty: f64,
    /// wall time of the epoch; excluded from determinism comparisons.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn first(&self) -> Option<&EpochStats> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,recon,penalty,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.recon, e.penalty, e.seconds));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Runs the optimization loop. Checkpoints go to `checkpoint` (final
/// state always; every `checkpoint_every` epochs too when nonzero).
/// Deterministic given the config: data order, init, and prior draws all
/// derive from `cfg.seed`.
pub fn train(
    cfg: &TrainConfig,
    images: &ImageBatch,
    prior: &PriorSpec,
    checkpoint: Option<&Path>,
) -> Result<(ModelParams, TrainLog)> {
    cfg.validate()?;
    let n = images.n();
    let batch = cfg.batch_size.min(n);
    if batch < 2 {
        return Err(Error::Invalid(format!(
            "training needs at least 2 images, got {n}"
        )));
    }
    if batch < cfg.batch_size {
        log::warn!(
            "dataset ({n} images) is smaller than batch_size {}; using batch {batch}",
            cfg.batch_size
        );
    }
    if cfg.regularizer == Regularizer::BatchKld && batch <= cfg.latent_dim {
        return Err(Error::RegularizerDegenerate(format!(
            "batch-moment KLD needs batch > latent dim, got batch {batch}, d {}",
            cfg.latent_dim
        )));
    }
    if cfg.regularizer == Regularizer::Mmd && prior.dim() != cfg.latent_dim {
        return Err(Error::shape("prior vs latent", &[prior.dim()], &[cfg.latent_dim]));
    }

    let input_dim = images.h() * images.w();
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, streams::INIT));
    let mut params = ModelParams::new(input_dim, &cfg.hidden, cfg.latent_dim, &mut init_rng)?;
    let sizes: Vec<usize> = params.params().iter().map(|t| t.len()).collect();
    let mut opt = Adam::new(cfg.lr, &sizes)?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, streams::SHUFFLE));
    let mut prior_rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, streams::PRIOR));
    let steps = n / batch;
    let mut order: Vec<usize> = (0..n).collect();
    let mut log_rows = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        for i in (1..n).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut recon_sum = 0.0;
        let mut penalty_sum = 0.0;
        for step in 0..steps {
            let xb = images.select(&order[step * batch..(step + 1) * batch]);
            let mut tape = crate::diffcore::Tape::new();
            let taped = params.on_tape(&mut tape, true);
            let xv = tape.leaf(xb.data().clone());
            // exploding params overflow the forward pass before the loss
            // value itself can be inspected
            let parts = match total_loss(
                &mut tape,
                &taped,
                xv,
                prior,
                cfg.lambda,
                cfg.regularizer,
                &cfg.kernel,
                cfg.estimator,
                &mut prior_rng,
            ) {
                Ok(parts) => parts,
                Err(Error::NonFinite { .. }) => {
                    return Err(Error::Diverged {
                        epoch,
                        step,
                        value: f64::NAN,
                    })
                }
                Err(e) => return Err(e),
            };
            let total = tape.value(parts.total).item()?;
            if !total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    value: total,
                });
            }
            recon_sum += tape.value(parts.recon).item()?;
            penalty_sum += match parts.penalty {
                Some(p) => tape.value(p).item()?,
                None => 0.0,
            };
            tape.backward(parts.total)?;
            let grads: Vec<Vec<f64>> = taped
                .param_vars()
                .iter()
                .map(|&v| tape.grad(v).expect("all parameters feed the loss").to_vec())
                .collect();
            let mut tensors = params.params_mut();
            opt.step(&mut tensors, &grads)?;
            if !params.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    value: total,
                });
            }
        }
        log_rows.epochs.push(EpochStats {
            epoch,
            recon: recon_sum / steps as f64,
            penalty: penalty_sum / steps as f64,
            seconds: started.elapsed().as_secs_f64(),
        });
        if let Some(path) = checkpoint {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && epoch < cfg.epochs {
                save_checkpoint(path, &params)?;
            }
        }
    }
    if let Some(path) = checkpoint {
        save_checkpoint(path, &params)?;
    }
    Ok((params, log_rows))
}

fn default_lps_split() -> f64 {
    0.8
}
fn default_mig_bins() -> usize {
    DEFAULT_MIG_BINS
}

/// Metric knobs for evaluation, all defaulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    #[serde(default)]
    pub regressor: RegressorConfig,
    #[serde(default = "default_lps_split")]
    pub lps_split: f64,
    #[serde(default = "default_mig_bins")]
    pub mig_bins: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            regressor: RegressorConfig::default(),
            lps_split: default_lps_split(),
            mig_bins: default_mig_bins(),
        }
    }
}

/// Largest latent batch compared against the prior in `evaluate`.
const EVAL_MMD_BATCH: usize = 1024;

/// Encodes the full dataset and writes the metrics block plus the
/// distribution report into `out_dir`. Returns the metric rows in the
/// order they were written. Metrics whose preconditions fail (too few
/// samples or dimensions) are skipped with a warning, never NaN.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    params: &ModelParams,
    images: &ImageBatch,
    factors: Option<&FactorTable>,
    prior: &PriorSpec,
    kernel: &KernelSpec,
    opts: &EvalOptions,
    eval_seed: u64,
    out_dir: &Path,
) -> Result<Vec<(String, f64)>> {
    let z = params.encode(images.data())?;
    let x_hat = params.decode(&z)?;
    let (n, d) = (z.shape()[0], z.shape()[1]);

    let mut rows: Vec<(String, f64)> = Vec::new();
    rows.push(("mse".to_string(), mse(images.data(), &x_hat)?));
    let e = nmse(images.data(), &x_hat)?;
    rows.push(("nmse_linear".to_string(), e.linear));
    rows.push(("nmse_db".to_string(), e.db));

    if d >= 2 {
        rows.push(("covariance_ratio".to_string(), covariance_ratio(&z)?));
    } else {
        log::warn!("covariance ratio skipped: latent dim {d} < 2");
    }

    if d >= 2 && n >= 100 {
        let report = lps_mlp(
            &z,
            &opts.regressor,
            opts.lps_split,
            seed::derive(eval_seed, streams::LPS_SPLIT),
        )?;
        rows.push(("lps".to_string(), report.lps));
        for (i, r2) in report.r2.iter().enumerate() {
            rows.push((format!("r2_dim{i}"), *r2));
        }
    } else {
        log::warn!("predictability score skipped: needs n >= 100 and d >= 2, got n={n}, d={d}");
    }

    if let Some(f) = factors {
        if d >= 2 {
            rows.push(("mig".to_string(), mig(&z, f, opts.mig_bins)?));
        }
    }

    // prior alignment on a capped, seeded subsample
    if prior.dim() == d {
        let k = n.min(EVAL_MMD_BATCH);
        if k >= 2 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(eval_seed, streams::PRIOR));
            let mut idx: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                idx.swap(i, j);
            }
            let sub = Tensor::new(
                vec![k, d],
                idx[..k].iter().flat_map(|&r| z.row(r).to_vec()).collect(),
            )?;
            let prior_batch = sample_prior(prior, k, &mut rng)?;
            let est = mmd2_biased(&sub, &prior_batch, kernel)?;
            rows.push(("mmd2_biased_prior".to_string(), est.value));
        }
    } else {
        log::warn!(
            "prior alignment skipped: prior dim {} != latent dim {d}",
            prior.dim()
        );
    }

    for (name, value) in &rows {
        if value.is_nan() {
            return Err(Error::Invalid(format!("metric {name} evaluated to NaN")));
        }
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_metrics_csv(&out_dir.join("metrics.csv"), &rows)?;
    distribution_report(&z, out_dir)?;
    Ok(rows)
}
