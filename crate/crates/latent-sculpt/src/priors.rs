//! Programmable priors: declarative per-dimension target distributions and
//! their samplers, plus the empirical prior backed by a latent dump.
//!
//! Analytic priors compose one component per latent dimension (Gaussian,
//! Uniform, or a Gaussian mixture); dimensions are sampled independently.
//! Dependent targets are expressed through the empirical form, which draws
//! rows with replacement from a previously written latent dump.

use std::path::Path;

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{read_latent_dump, write_latent_dump, ImageBatch};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmComponent {
    pub weight: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// One latent dimension's target distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DimPrior {
    Gaussian { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    Gmm { components: Vec<GmmComponent> },
}

impl DimPrior {
    fn validate(&self, field: &str) -> Result<()> {
        match self {
            DimPrior::Gaussian { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || *sigma <= 0.0 {
                    return Err(Error::config(
                        format!("{field}.gaussian.sigma"),
                        format!("needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"),
                    ));
                }
            }
            DimPrior::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(Error::config(
                        format!("{field}.uniform"),
                        format!("needs finite lo < hi, got lo={lo}, hi={hi}"),
                    ));
                }
            }
            DimPrior::Gmm { components } => {
                if components.is_empty() {
                    return Err(Error::config(
                        format!("{field}.gmm.components"),
                        "must be non-empty",
                    ));
                }
                for (i, c) in components.iter().enumerate() {
                    if !(c.weight > 0.0) || !c.weight.is_finite() {
                        return Err(Error::config(
                            format!("{field}.gmm.components[{i}].weight"),
                            format!("must be > 0, got {}", c.weight),
                        ));
                    }
                    if !c.mu.is_finite() || !c.sigma.is_finite() || c.sigma <= 0.0 {
                        return Err(Error::config(
                            format!("{field}.gmm.components[{i}].sigma"),
                            format!("needs finite mu and sigma > 0, got mu={}, sigma={}", c.mu, c.sigma),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Normalizes GMM weights to sum to 1; other kinds are unchanged.
    fn normalize(&mut self) {
        if let DimPrior::Gmm { components } = self {
            let total: f64 = components.iter().map(|c| c.weight).sum();
            for c in components {
                c.weight /= total;
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            DimPrior::Gaussian { mu, sigma } => {
                Normal::new(*mu, *sigma).expect("validated sigma > 0").sample(rng)
            }
            DimPrior::Uniform { lo, hi } => rng.random_range(*lo..*hi),
            DimPrior::Gmm { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = components.last().expect("validated non-empty");
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                Normal::new(chosen.mu, chosen.sigma)
                    .expect("validated sigma > 0")
                    .sample(rng)
            }
        }
    }
}

/// Source half of a prior config: points at a latent dump on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalSource {
    pub path: std::path::PathBuf,
}

/// Declarative prior document: exactly one of `dims` (analytic form) or
/// `empirical` (latent-dump form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<DimPrior>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<EmpiricalSource>,
}

impl PriorConfig {
    pub fn analytic(dims: Vec<DimPrior>) -> Self {
        PriorConfig {
            dims: Some(dims),
            empirical: None,
        }
    }

    pub fn empirical(path: impl Into<std::path::PathBuf>) -> Self {
        PriorConfig {
            dims: None,
            empirical: Some(EmpiricalSource { path: path.into() }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dims, &self.empirical) {
            (Some(dims), None) => {
                if dims.is_empty() {
                    return Err(Error::config("prior.dims", "must list at least one dimension"));
                }
                for (j, dim) in dims.iter().enumerate() {
                    dim.validate(&format!("prior.dims[{j}]"))?;
                }
                Ok(())
            }
            (None, Some(_)) => Ok(()),
            (Some(_), Some(_)) => Err(Error::config(
                "prior",
                "give either `dims` or `empirical`, not both",
            )),
            (None, None) => Err(Error::config(
                "prior",
                "needs either `dims` (analytic) or `empirical` (latent dump)",
            )),
        }
    }

    /// Loads the referenced dump (for the empirical form) and produces a
    /// sampleable spec. Relative dump paths resolve against `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<PriorSpec> {
        self.validate()?;
        match (&self.dims, &self.empirical) {
            (Some(dims), None) => {
                let mut dims = dims.clone();
                for d in &mut dims {
                    d.normalize();
                }
                Ok(PriorSpec::Analytic(dims))
            }
            (None, Some(src)) => {
                let path = if src.path.is_absolute() {
                    src.path.clone()
                } else {
                    base_dir.join(&src.path)
                };
                let samples = read_latent_dump(&path)?;
                PriorSpec::empirical(samples)
            }
            _ => unreachable!("validate() enforces exactly one form"),
        }
    }
}

/// Parses and validates a prior config document; GMM weights are normalized
/// when the config is resolved.
pub fn load_prior_config(text: &str) -> Result<PriorConfig> {
    let cfg: PriorConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// A sampleable prior over the latent space.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// Independent per-dimension components (GMM weights already normalized).
    Analytic(Vec<DimPrior>),
    /// Rows drawn with replacement from a latent dump.
    Empirical(Tensor),
}

impl PriorSpec {
    pub fn empirical(samples: Tensor) -> Result<Self> {
        if samples.rank() != 2 {
            return Err(Error::Invalid(format!(
                "empirical prior needs a rank-2 dump, got shape {:?}",
                samples.shape()
            )));
        }
        Ok(PriorSpec::Empirical(samples))
    }

    /// Standard normal in d dimensions: the conventional default target.
    pub fn standard_normal(d: usize) -> Self {
        PriorSpec::Analytic(vec![DimPrior::Gaussian { mu: 0.0, sigma: 1.0 }; d])
    }

    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::Analytic(dims) => dims.len(),
            PriorSpec::Empirical(t) => t.shape()[1],
        }
    }
}

/// Draws an n x d batch from the prior. n = 0 yields a valid empty batch.
pub fn sample_prior<R: Rng>(spec: &PriorSpec, n: usize, rng: &mut R) -> Result<Tensor> {
    let d = spec.dim();
    match spec {
        PriorSpec::Analytic(dims) => {
            let mut vals = Vec::with_capacity(n * d);
            for _ in 0..n {
                for dim in dims {
                    vals.push(dim.sample(rng));
                }
            }
            Tensor::new(vec![n, d], vals)
        }
        PriorSpec::Empirical(dump) => {
            let rows = dump.shape()[0];
            if rows == 0 && n > 0 {
                return Err(Error::EstimatorUndefined(
                    "empirical prior dump holds no rows to sample".into(),
                ));
            }
            let mut vals = Vec::with_capacity(n * d);
            for _ in 0..n {
                let i = rng.random_range(0..rows);
                vals.extend_from_slice(dump.row(i));
            }
            Tensor::new(vec![n, d], vals)
        }
    }
}

/// Encodes every sample with the model and writes the latents as a dump:
/// the file doubles as an empirical prior source.
pub fn build_empirical_prior(
    params: &ModelParams,
    images: &ImageBatch,
    path: &Path,
) -> Result<Tensor> {
    if images.n() == 0 {
        return Err(Error::Invalid("cannot build an empirical prior from an empty dataset".into()));
    }
    let latents = params.encode(images.data())?;
    write_latent_dump(path, &latents)?;
    Ok(latents)
}
