//! Experiment driver: every subcommand reads a JSON config document,
//! derives all randomness from its root seed, and writes reproducible
//! artifacts under an output directory. Flags may override only the seed
//! and the output directory; the `LS_OUT` environment variable relocates
//! relative output directories under one root.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 divergence.

use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{read_latent_dump, write_idx, DatasetSpec};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::metrics::{distribution_report, ks_statistic, lps_mlp, write_metrics_csv, RegressorConfig};
use crate::mmd::mmd2_biased;
use crate::models::{load_checkpoint, Regularizer};
use crate::priors::{build_empirical_prior, load_prior_config, sample_prior, PriorConfig};
use crate::seed::{self, streams};
use crate::trainer::{self, EvalOptions, TrainConfig};

/// One experiment document: the training recipe plus where results go and
/// how they are measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub metrics: EvalOptions,
}

/// Dataset-only document for `gen-data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDataConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn base_dir(config_path: &Path) -> PathBuf {
    let parent = config_path.parent().unwrap_or(Path::new(""));
    if parent.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        parent.to_path_buf()
    }
}

/// Loads and validates an experiment config; returns the directory its
/// relative paths resolve against.
pub fn load_experiment(path: &Path) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg: ExperimentConfig = read_json(path)?;
    cfg.train.validate()?;
    cfg.metrics.regressor.validate()?;
    Ok((cfg, base_dir(path)))
}

/// Chooses the output directory: the `--out` flag beats the config value,
/// and `LS_OUT` (when set) becomes the root for relative directories.
pub fn resolve_out_dir(configured: &Path, flag: Option<&Path>) -> PathBuf {
    let chosen = flag.unwrap_or(configured);
    match std::env::var_os("LS_OUT") {
        Some(root) if chosen.is_relative() => PathBuf::from(root).join(chosen),
        _ => chosen.to_path_buf(),
    }
}

/// 3 for a divergence abort, 2 for every other failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } => 3,
        _ => 2,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn print_rows(rows: &[(String, f64)]) {
    for (name, value) in rows {
        println!("{name} = {value}");
    }
}

/// Trains per config, then writes checkpoint, train_log.csv, metrics.csv,
/// and the distribution report under the output directory.
pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let (mut cfg, base) = load_experiment(config_path)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let out_dir = resolve_out_dir(&cfg.out_dir, out);
    ensure_dir(&out_dir)?;
    let (images, factors, prior) = trainer::materialize(&cfg.train, &base)?;
    let checkpoint = out_dir.join("checkpoint.mdlp");
    let (params, log) = trainer::train(&cfg.train, &images, &prior, Some(&checkpoint))?;
    log.write_csv(&out_dir.join("train_log.csv"))?;
    let rows = trainer::evaluate(
        &params,
        &images,
        factors.as_ref(),
        &prior,
        &cfg.train.kernel,
        &cfg.metrics,
        cfg.train.seed,
        &out_dir,
    )?;
    println!(
        "trained {} epochs on {} images; artifacts in {}",
        cfg.train.epochs,
        images.n(),
        out_dir.display()
    );
    print_rows(&rows);
    Ok(())
}

/// Re-evaluates a checkpoint against the config's dataset and prior.
pub fn cmd_eval(
    config_path: &Path,
    checkpoint: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let (mut cfg, base) = load_experiment(config_path)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let out_dir = resolve_out_dir(&cfg.out_dir, out);
    ensure_dir(&out_dir)?;
    let params = load_checkpoint(checkpoint)?;
    let (images, factors, prior) = trainer::materialize(&cfg.train, &base)?;
    let rows = trainer::evaluate(
        &params,
        &images,
        factors.as_ref(),
        &prior,
        &cfg.train.kernel,
        &cfg.metrics,
        cfg.train.seed,
        &out_dir,
    )?;
    print_rows(&rows);
    Ok(())
}

/// Scores a latent dump and writes lps.csv next to it (or into `--out`).
pub fn cmd_lps(dump: &Path, split: f64, seed: u64, out: Option<&Path>) -> Result<()> {
    let z = read_latent_dump(dump)?;
    let cfg = RegressorConfig::default();
    let report = lps_mlp(&z, &cfg, split, seed)?;
    println!("lps = {}", report.lps);
    for (i, r2) in report.r2.iter().enumerate() {
        println!("r2_dim{i} = {r2}");
    }
    let default_dir = base_dir(dump);
    let out_dir = resolve_out_dir(&default_dir, out);
    ensure_dir(&out_dir)?;
    let mut rows: Vec<(String, f64)> = vec![("lps".to_string(), report.lps)];
    for (i, r2) in report.r2.iter().enumerate() {
        rows.push((format!("r2_dim{i}"), *r2));
    }
    write_metrics_csv(&out_dir.join("lps.csv"), &rows)?;
    Ok(())
}

/// Draws n prior samples into a latent dump, with a distribution report
/// beside it when there are enough samples.
pub fn cmd_sample_prior(config_path: &Path, n: usize, out_dump: &Path, seed: u64) -> Result<()> {
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let cfg: PriorConfig = load_prior_config(&text)?;
    let spec = cfg.resolve(&base_dir(config_path))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, streams::PRIOR));
    let samples = sample_prior(&spec, n, &mut rng)?;
    if let Some(dir) = out_dump.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    crate::data::write_latent_dump(out_dump, &samples)?;
    println!("wrote {n} samples of dim {} to {}", spec.dim(), out_dump.display());
    if n >= 2 {
        let stem = out_dump
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "prior".to_string());
        let report_dir = out_dump
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("{stem}_report"));
        distribution_report(&samples, &report_dir)?;
        println!("report in {}", report_dir.display());
    } else {
        log::warn!("skipping distribution report: needs at least 2 samples, got {n}");
    }
    Ok(())
}

/// Latent-space copy: dumps the teacher's aggregate posterior over the
/// config's dataset, trains the student against that dump with MMD, and
/// reports per-dimension KS plus the student-teacher MMD.
pub fn cmd_copy_latent(
    teacher_ckpt: &Path,
    config_path: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let (mut cfg, base) = load_experiment(config_path)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if cfg.train.regularizer != Regularizer::Mmd {
        return Err(Error::config(
            "train.regularizer",
            format!("latent copy trains with the mmd regularizer, got {}", cfg.train.regularizer),
        ));
    }
    let teacher = load_checkpoint(teacher_ckpt)?;
    if teacher.latent_dim() != cfg.train.latent_dim {
        return Err(Error::shape(
            "teacher vs student latent dim",
            &[teacher.latent_dim()],
            &[cfg.train.latent_dim],
        ));
    }
    let out_dir = resolve_out_dir(&cfg.out_dir, out);
    ensure_dir(&out_dir)?;

    let (images, _, _) = trainer::materialize(&cfg.train, &base)?;
    if teacher.input_dim() != images.h() * images.w() {
        return Err(Error::shape(
            "teacher input vs dataset pixels",
            &[teacher.input_dim()],
            &[images.h() * images.w()],
        ));
    }
    let dump_path = out_dir.join("teacher_latents.ltnt");
    let teacher_z = build_empirical_prior(&teacher, &images, &dump_path)?;
    distribution_report(&teacher_z, &out_dir.join("teacher_report"))?;

    cfg.train.prior = PriorConfig::empirical(&dump_path);
    let (_, _, prior) = trainer::materialize(&cfg.train, &base)?;
    let checkpoint = out_dir.join("student.mdlp");
    let (student, log) = trainer::train(&cfg.train, &images, &prior, Some(&checkpoint))?;
    log.write_csv(&out_dir.join("train_log.csv"))?;
    let student_z = student.encode(images.data())?;
    distribution_report(&student_z, &out_dir.join("student_report"))?;

    let d = cfg.train.latent_dim;
    let n = student_z.shape()[0];
    let column = |t: &Tensor, j: usize| -> Vec<f64> { (0..t.shape()[0]).map(|i| t.at(i, j)).collect() };
    let mut rows: Vec<(String, f64)> = Vec::new();
    for j in 0..d {
        let sc = column(&student_z, j);
        let tc = column(&teacher_z, j);
        rows.push((format!("ks_dim{j}"), ks_statistic(&sc, &tc)?));
        let var = |c: &[f64]| {
            let m = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / c.len() as f64
        };
        let (tv, sv) = (var(&tc), var(&sc));
        rows.push((format!("teacher_var_dim{j}"), tv));
        rows.push((format!("student_var_dim{j}"), sv));
        if tv < 1e-8 {
            log::warn!("teacher latent dim {j} is near-constant (var {tv:.3e})");
        }
    }
    // seeded 512-vs-512 comparison batch
    let k = n.min(512);
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.train.seed, streams::PRIOR));
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    let sub = Tensor::new(
        vec![k, d],
        idx[..k].iter().flat_map(|&r| student_z.row(r).to_vec()).collect(),
    )?;
    let dump_draw = sample_prior(&prior, k, &mut rng)?;
    let est = mmd2_biased(&sub, &dump_draw, &cfg.train.kernel)?;
    rows.push(("mmd2_student_teacher".to_string(), est.value));
    write_metrics_csv(&out_dir.join("metrics.csv"), &rows)?;
    print_rows(&rows);
    Ok(())
}

/// Materializes a dataset spec to images.idx (+ factors.csv when the
/// generator knows its factors).
pub fn cmd_gen_data(config_path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let mut cfg: GenDataConfig = read_json(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out_dir = resolve_out_dir(&cfg.out_dir, out);
    ensure_dir(&out_dir)?;
    let (images, factors) = cfg
        .dataset
        .load(&base_dir(config_path), seed::derive(cfg.seed, streams::DATA))?;
    let idx_path = out_dir.join("images.idx");
    std::fs::write(&idx_path, write_idx(&images)).map_err(|e| Error::io(&idx_path, e))?;
    println!("wrote {} images ({}x{}) to {}", images.n(), images.h(), images.w(), idx_path.display());
    if let Some(f) = factors {
        let fpath = out_dir.join("factors.csv");
        f.write_csv(&fpath)?;
        println!("wrote factors ({}) to {}", f.names().join(","), fpath.display());
    }
    Ok(())
}
