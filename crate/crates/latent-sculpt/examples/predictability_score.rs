//! The Latent Predictability Score on known geometry.
//!
//! LPS is the mean held-out R² of predicting each latent dimension from
//! all the others with a small MLP. Independent dimensions score near
//! zero; redundant ones score near one. This example builds both cases
//! from the same Gaussian draw so the contrast is pure structure.
//!
//! Run with: cargo run --release --example predictability_score

use latent_sculpt::diffcore::Tensor;
use latent_sculpt::metrics::{lps_mlp, RegressorConfig};
use latent_sculpt::Result;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1500;
    let dist = rand_distr::Normal::new(0.0, 1.0).unwrap();

    // three independent columns
    let independent = Tensor::new(
        vec![n, 3],
        (0..n * 3).map(|_| rng.sample(dist)).collect(),
    )?;

    // third column becomes a deterministic mix of the first two
    let mut entangled = independent.values().to_vec();
    for i in 0..n {
        entangled[i * 3 + 2] = 0.8 * entangled[i * 3] - 0.5 * entangled[i * 3 + 1];
    }
    let entangled = Tensor::new(vec![n, 3], entangled)?;

    let cfg = RegressorConfig::default();
    let a = lps_mlp(&independent, &cfg, 0.8, 0)?;
    let b = lps_mlp(&entangled, &cfg, 0.8, 0)?;

    println!("independent columns: lps {:+.3}, per-dim R2 {:?}", a.lps, round3(&a.r2));
    println!("entangled third column: lps {:+.3}, per-dim R2 {:?}", b.lps, round3(&b.r2));
    println!("regressor digest {}", a.regressor_digest);
    Ok(())
}

fn round3(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}
