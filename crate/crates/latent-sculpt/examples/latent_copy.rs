//! Copying one model's latent space into another.
//!
//! Trains a teacher autoencoder, dumps its aggregate posterior over the
//! dataset, then trains a freshly initialized student whose MMD target is
//! that empirical dump instead of an analytic prior. The student inherits
//! the teacher's latent geometry without ever seeing its weights; the
//! per-dimension Kolmogorov-Smirnov statistics at the end quantify the
//! match. A few minutes on CPU.
//!
//! Run with: cargo run --release --example latent_copy

use latent_sculpt::data::{DatasetSpec, XyVariant};
use latent_sculpt::metrics::ks_statistic;
use latent_sculpt::priors::{build_empirical_prior, DimPrior, PriorConfig};
use latent_sculpt::trainer::{self, TrainConfig};
use latent_sculpt::Result;
use std::path::Path;

fn main() -> Result<()> {
    let mut cfg = TrainConfig {
        lambda: 0.5,
        batch_size: 256,
        lr: 1e-3,
        epochs: 40,
        regularizer: Default::default(),
        estimator: Default::default(),
        kernel: Default::default(),
        seed: 11,
        hidden: vec![256, 64],
        latent_dim: 2,
        dataset: DatasetSpec::Xy {
            variant: XyVariant::Xy,
            n: 2000,
            resolution: 32,
        },
        prior: PriorConfig::analytic(vec![
            DimPrior::Gaussian { mu: 0.0, sigma: 1.0 },
            DimPrior::Gaussian { mu: 0.0, sigma: 1.0 },
        ]),
        checkpoint_every: 0,
    };

    let (images, _, prior) = trainer::materialize(&cfg, Path::new("."))?;
    println!("training teacher...");
    let (teacher, _) = trainer::train(&cfg, &images, &prior, None)?;

    let dump = Path::new("latent_copy_demo").join("teacher.ltnt");
    std::fs::create_dir_all(dump.parent().unwrap()).expect("create demo dir");
    let teacher_z = build_empirical_prior(&teacher, &images, &dump)?;
    println!("teacher latents dumped to {}", dump.display());

    // student: different init stream, same images, dump as the target
    cfg.seed = 12;
    cfg.prior = PriorConfig::empirical(&dump);
    let (_, _, student_prior) = trainer::materialize(&cfg, Path::new("."))?;
    println!("training student against the dump...");
    let (student, _) = trainer::train(&cfg, &images, &student_prior, None)?;

    let student_z = student.encode(images.data())?;
    for j in 0..cfg.latent_dim {
        let t: Vec<f64> = (0..teacher_z.shape()[0]).map(|i| teacher_z.at(i, j)).collect();
        let s: Vec<f64> = (0..student_z.shape()[0]).map(|i| student_z.at(i, j)).collect();
        println!("dim {j}: KS(student, teacher) = {:.4}", ks_statistic(&s, &t)?);
    }
    Ok(())
}
