//! Desk-scale MLP autoencoder and the combined training objective:
//! reconstruction MSE plus lambda times a latent regularizer (MMD toward a
//! programmable prior, or the batch-moment KLD comparison baseline).
//!
//! The encoder ends in an identity latent layer; the decoder mirrors the
//! encoder and ends in a sigmoid so outputs live in (0, 1). Hidden layers
//! are relu.

use std::io::Write as _;
use std::path::Path;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::diffcore::{gemm::matmul_acc, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::mmd::{mmd_loss, Estimator};
use crate::priors::{sample_prior, PriorSpec};

pub const DEFAULT_HIDDEN: [usize; 2] = [256, 64];

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// fan_in x fan_out, row-major.
    w: Tensor,
    /// fan_out biases.
    b: Tensor,
}

impl Layer {
    fn fan_in(&self) -> usize {
        self.w.shape()[0]
    }

    fn fan_out(&self) -> usize {
        self.w.shape()[1]
    }
}

/// Encoder/decoder weight set. Parameter traversal order (encoder layers
/// then decoder layers, weights before biases) is part of the contract:
/// the optimizer state and tape registration both follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    encoder: Vec<Layer>,
    decoder: Vec<Layer>,
}

fn init_layer<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Layer {
    // uniform fan-in scaling; bound 1/sqrt(fan_in)
    let bound = 1.0 / (fan_in as f64).sqrt();
    let w = Tensor::new(
        vec![fan_in, fan_out],
        (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect(),
    )
    .expect("sized to shape");
    let b = Tensor::vector((0..fan_out).map(|_| rng.random_range(-bound..bound)).collect());
    Layer { w, b }
}

impl ModelParams {
    /// Fresh model: encoder input -> hidden... -> latent, decoder mirrored.
    pub fn new<R: Rng>(
        input_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        for (name, v) in [("input_dim", input_dim), ("latent_dim", latent_dim)] {
            if v == 0 {
                return Err(Error::config(format!("model.{name}"), "must be at least 1"));
            }
        }
        if hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("model.hidden", "layer widths must be at least 1"));
        }
        let mut enc_widths = vec![input_dim];
        enc_widths.extend_from_slice(hidden);
        enc_widths.push(latent_dim);
        let mut dec_widths = vec![latent_dim];
        dec_widths.extend(hidden.iter().rev());
        dec_widths.push(input_dim);

        let build = |widths: &[usize], rng: &mut R| {
            widths
                .windows(2)
                .map(|io| init_layer(io[0], io[1], rng))
                .collect()
        };
        Ok(ModelParams {
            encoder: build(&enc_widths, rng),
            decoder: build(&dec_widths, rng),
        })
    }

    /// Builds a model from explicit (weights, biases) layers; shapes must
    /// chain and the decoder must start where the encoder ends.
    pub fn from_layers(
        encoder: Vec<(Tensor, Tensor)>,
        decoder: Vec<(Tensor, Tensor)>,
    ) -> Result<Self> {
        let convert = |name: &str, layers: Vec<(Tensor, Tensor)>| -> Result<Vec<Layer>> {
            if layers.is_empty() {
                return Err(Error::config(format!("model.{name}"), "needs at least one layer"));
            }
            let mut out = Vec::with_capacity(layers.len());
            for (i, (w, b)) in layers.into_iter().enumerate() {
                if w.rank() != 2 || b.rank() != 1 || b.shape()[0] != w.shape()[1] {
                    return Err(Error::Invalid(format!(
                        "{name} layer {i}: weights {:?} and biases {:?} do not form a dense layer",
                        w.shape(),
                        b.shape()
                    )));
                }
                if let Some(prev) = out.last() {
                    let prev: &Layer = prev;
                    if prev.fan_out() != w.shape()[0] {
                        return Err(Error::shape("layer chain", &[prev.fan_out()], w.shape()));
                    }
                }
                out.push(Layer { w, b });
            }
            Ok(out)
        };
        let encoder = convert("encoder", encoder)?;
        let decoder = convert("decoder", decoder)?;
        if encoder.last().unwrap().fan_out() != decoder[0].fan_in() {
            return Err(Error::shape(
                "latent width (encoder out vs decoder in)",
                &[encoder.last().unwrap().fan_out()],
                &[decoder[0].fan_in()],
            ));
        }
        Ok(ModelParams { encoder, decoder })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].fan_in()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().expect("non-empty").fan_out()
    }

    /// All parameter tensors in traversal order.
    pub fn params(&self) -> Vec<&Tensor> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|l| [&l.w, &l.b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.encoder
            .iter_mut()
            .chain(&mut self.decoder)
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|t| t.values().iter().all(|v| v.is_finite()))
    }

    /// Registers every parameter on the tape (trainable or constant) for a
    /// differentiable forward pass.
    pub fn on_tape(&self, tape: &mut Tape, trainable: bool) -> TapedModel {
        let mut put = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.leaf(t.clone())
            }
        };
        let enc: Vec<(Var, Var)> = self.encoder.iter().map(|l| (put(&l.w), put(&l.b))).collect();
        let dec: Vec<(Var, Var)> = self.decoder.iter().map(|l| (put(&l.w), put(&l.b))).collect();
        TapedModel { enc, dec }
    }

    fn forward_plain(layers: &[Layer], x: &Tensor, sigmoid_last: bool) -> Result<Tensor> {
        if x.rank() != 2 || x.shape()[1] != layers[0].fan_in() {
            return Err(Error::shape("forward", x.shape(), layers[0].w.shape()));
        }
        let n = x.shape()[0];
        let mut h = x.clone();
        for (i, layer) in layers.iter().enumerate() {
            let (fi, fo) = (layer.fan_in(), layer.fan_out());
            let mut out = vec![0.0; n * fo];
            matmul_acc(h.values(), layer.w.values(), &mut out, n, fi, fo, false, false, 1.0);
            let last = i + 1 == layers.len();
            let bv = layer.b.values();
            for r in 0..n {
                for c in 0..fo {
                    let v = out[r * fo + c] + bv[c];
                    out[r * fo + c] = match (last, sigmoid_last) {
                        (false, _) => v.max(0.0),
                        (true, true) => 1.0 / (1.0 + (-v).exp()),
                        (true, false) => v,
                    };
                }
            }
            h = Tensor::new(vec![n, fo], out)?;
        }
        Ok(h)
    }

    /// Deterministic latent codes for a pixel matrix (n x input_dim).
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        Self::forward_plain(&self.encoder, x, false)
    }

    /// Reconstructions in (0, 1) for a latent batch (n x latent_dim).
    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        Self::forward_plain(&self.decoder, z, true)
    }
}

/// Tape-registered parameter handles for one differentiable forward pass.
pub struct TapedModel {
    enc: Vec<(Var, Var)>,
    dec: Vec<(Var, Var)>,
}

impl TapedModel {
    pub fn encode(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, &(w, b)) in self.enc.iter().enumerate() {
            let lin = tape.matmul(h, w)?;
            h = tape.add_row(lin, b)?;
            if i + 1 < self.enc.len() {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }

    pub fn decode(&self, tape: &mut Tape, z: Var) -> Result<Var> {
        let mut h = z;
        for (i, &(w, b)) in self.dec.iter().enumerate() {
            let lin = tape.matmul(h, w)?;
            h = tape.add_row(lin, b)?;
            h = if i + 1 < self.dec.len() {
                tape.relu(h)?
            } else {
                tape.sigmoid(h)?
            };
        }
        Ok(h)
    }

    /// Parameter handles in the same order as [`ModelParams::params`].
    pub fn param_vars(&self) -> Vec<Var> {
        self.enc
            .iter()
            .chain(&self.dec)
            .flat_map(|&(w, b)| [w, b])
            .collect()
    }
}

/// Mean over batch and pixels of the squared reconstruction error.
pub fn reconstruction_loss(tape: &mut Tape, x: Var, x_hat: Var) -> Result<Var> {
    let diff = tape.sub(x_hat, x)?;
    let sq = tape.square(diff)?;
    tape.mean(sq, None)
}

/// Plain (non-tape) MSE, for evaluation paths.
pub fn mse(x: &Tensor, x_hat: &Tensor) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::shape("mse", x.shape(), x_hat.shape()));
    }
    let n = x.len().max(1);
    Ok(x
        .values()
        .iter()
        .zip(x_hat.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n as f64)
}

/// Empirical mean and unbiased covariance of a latent batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    /// length-d mean.
    pub mean: Tensor,
    /// d x d sample covariance (divisor n - 1).
    pub cov: Tensor,
}

pub fn batch_stats(z: &Tensor) -> Result<BatchStats> {
    if z.rank() != 2 {
        return Err(Error::Invalid(format!(
            "batch statistics need a rank-2 batch, got {:?}",
            z.shape()
        )));
    }
    let (n, d) = (z.shape()[0], z.shape()[1]);
    if n < 2 {
        return Err(Error::EstimatorUndefined(format!(
            "batch statistics need at least 2 samples, got {n}"
        )));
    }
    let v = z.values();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += v[i * d + j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered = Vec::with_capacity(n * d);
    for i in 0..n {
        for j in 0..d {
            centered.push(v[i * d + j] - mean[j]);
        }
    }
    let mut cov = vec![0.0; d * d];
    matmul_acc(&centered, &centered, &mut cov, d, n, d, true, false, 1.0 / (n - 1) as f64);
    Ok(BatchStats {
        mean: Tensor::vector(mean),
        cov: Tensor::new(vec![d, d], cov)?,
    })
}

fn scaled_eye(d: usize, s: f64) -> Tensor {
    let mut vals = vec![0.0; d * d];
    for i in 0..d {
        vals[i * d + i] = s;
    }
    Tensor::new(vec![d, d], vals).expect("sized to shape")
}

/// Closed-form Gaussian KL of the batch moments against N(0, I):
/// 0.5 (tr(S) + |mu|^2 - d - log det S), with 1e-6 I jitter inside the
/// log det. Requires batch size > latent dim so S can be full rank.
pub fn batch_kld_loss(tape: &mut Tape, z: Var) -> Result<Var> {
    let shape = tape.value(z).shape().to_vec();
    if shape.len() != 2 {
        return Err(Error::Invalid(format!(
            "batch-moment KLD needs a rank-2 latent batch, got {shape:?}"
        )));
    }
    let (n, d) = (shape[0], shape[1]);
    if n <= d {
        return Err(Error::RegularizerDegenerate(format!(
            "batch-moment KLD needs batch size > latent dim for a full-rank covariance, got n={n}, d={d}"
        )));
    }
    let inv_nm1 = 1.0 / (n - 1) as f64;
    let mu = tape.mean(z, Some(0))?;
    let neg_mu = tape.neg(mu)?;
    let centered = tape.add_row(z, neg_mu)?;
    // tr(S) = sum of squared centered entries / (n-1)
    let sq = tape.square(centered)?;
    let ssq = tape.sum(sq, None)?;
    let trace = tape.scale(ssq, inv_nm1)?;
    let mu_sq = tape.square(mu)?;
    let mu_norm = tape.sum(mu_sq, None)?;
    let ct = tape.transpose(centered)?;
    let prod = tape.matmul(ct, centered)?;
    let cov = tape.scale(prod, inv_nm1)?;
    let jitter = tape.leaf(scaled_eye(d, 1e-6));
    let cov_j = tape.add(cov, jitter)?;
    let logdet = tape.logdet_spd(cov_j)?;
    let t = tape.add(trace, mu_norm)?;
    let t = tape.sub(t, logdet)?;
    let t = tape.add_const(t, -(d as f64))?;
    tape.scale(t, 0.5)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    Mmd,
    BatchKld,
    None,
}

impl std::fmt::Display for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regularizer::Mmd => "mmd",
            Regularizer::BatchKld => "batch_kld",
            Regularizer::None => "none",
        })
    }
}

/// Handles to the pieces of one training objective evaluation.
pub struct LossParts {
    pub total: Var,
    pub recon: Var,
    pub penalty: Option<Var>,
}

/// Full objective on the tape: encode, decode, reconstruction MSE, plus
/// lambda times the chosen latent penalty. The MMD penalty draws a fresh
/// prior batch (same size as the encoded batch) from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn total_loss<R: Rng>(
    tape: &mut Tape,
    model: &TapedModel,
    x: Var,
    prior: &PriorSpec,
    lambda: f64,
    regularizer: Regularizer,
    kernel: &KernelSpec,
    estimator: Estimator,
    rng: &mut R,
) -> Result<LossParts> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::config(
            "lambda",
            format!("must be a nonnegative finite number, got {lambda}"),
        ));
    }
    let z = model.encode(tape, x)?;
    let x_hat = model.decode(tape, z)?;
    let recon = reconstruction_loss(tape, x, x_hat)?;
    let penalty = match regularizer {
        Regularizer::None => None,
        Regularizer::Mmd => {
            let m = tape.value(z).shape()[0];
            let d = tape.value(z).shape()[1];
            if prior.dim() != d {
                return Err(Error::shape("prior vs latent", &[prior.dim()], &[d]));
            }
            let prior_batch = sample_prior(prior, m, rng)?;
            Some(mmd_loss(tape, z, &prior_batch, kernel, estimator)?)
        }
        Regularizer::BatchKld => Some(batch_kld_loss(tape, z)?),
    };
    let total = match penalty {
        None => recon,
        Some(p) => {
            let scaled = tape.scale(p, lambda)?;
            tape.add(recon, scaled)?
        }
    };
    Ok(LossParts {
        total,
        recon,
        penalty,
    })
}

// ---- checkpoint container --------------------------------------------------

const CKPT_MAGIC: [u8; 4] = *b"MDLP";
const CKPT_VERSION: u32 = 1;

/// Binary checkpoint: magic "MDLP", version u32 = 1, encoder/decoder layer
/// counts (u32 each), a layer table of (fan_in, fan_out) u32 pairs, then
/// all parameters as little-endian f64 (per layer: weights row-major, then
/// biases), encoder first.
pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&CKPT_MAGIC);
    bytes.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(params.encoder.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&(params.decoder.len() as u32).to_le_bytes());
    for layer in params.encoder.iter().chain(&params.decoder) {
        bytes.extend_from_slice(&(layer.fan_in() as u32).to_le_bytes());
        bytes.extend_from_slice(&(layer.fan_out() as u32).to_le_bytes());
    }
    for layer in params.encoder.iter().chain(&params.decoder) {
        for &v in layer.w.values().iter().chain(layer.b.values()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let need = |offset: usize, len: usize| -> Result<&[u8]> {
        bytes.get(offset..offset + len).ok_or_else(|| {
            Error::format(
                "checkpoint",
                format!("truncated: needed {len} bytes at offset {offset}, file has {}", bytes.len()),
            )
        })
    };
    if need(0, 4)? != CKPT_MAGIC {
        return Err(Error::format(
            "checkpoint",
            format!("bad magic {:02x?} at offset 0, expected \"MDLP\"", &bytes[..4.min(bytes.len())]),
        ));
    }
    let word = |off: usize| -> Result<u32> {
        Ok(u32::from_le_bytes(need(off, 4)?.try_into().expect("4 bytes")))
    };
    let version = word(4)?;
    if version != CKPT_VERSION {
        return Err(Error::format(
            "checkpoint",
            format!("unsupported version {version}, expected {CKPT_VERSION}"),
        ));
    }
    let n_enc = word(8)? as usize;
    let n_dec = word(12)? as usize;
    if n_enc == 0 || n_dec == 0 {
        return Err(Error::format("checkpoint", "layer counts must be nonzero"));
    }
    let mut off = 16;
    let mut shapes = Vec::with_capacity(n_enc + n_dec);
    for _ in 0..n_enc + n_dec {
        let fi = word(off)? as usize;
        let fo = word(off + 4)? as usize;
        shapes.push((fi, fo));
        off += 8;
    }
    let read_layers = |count: usize, shapes: &[(usize, usize)], off: &mut usize| -> Result<Vec<(Tensor, Tensor)>> {
        let mut layers = Vec::with_capacity(count);
        for &(fi, fo) in shapes.iter().take(count) {
            let wn = fi * fo;
            let mut vals = Vec::with_capacity(wn + fo);
            for k in 0..wn + fo {
                let chunk = need(*off + 8 * k, 8)?;
                vals.push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
            }
            *off += 8 * (wn + fo);
            let w = Tensor::new(vec![fi, fo], vals[..wn].to_vec())?;
            let b = Tensor::vector(vals[wn..].to_vec());
            layers.push((w, b));
        }
        Ok(layers)
    };
    let enc = read_layers(n_enc, &shapes[..n_enc], &mut off)?;
    let dec = read_layers(n_dec, &shapes[n_enc..], &mut off)?;
    if off != bytes.len() {
        return Err(Error::format(
            "checkpoint",
            format!("{} trailing bytes after offset {off}", bytes.len() - off),
        ));
    }
    ModelParams::from_layers(enc, dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{fd_grad, max_rel_err};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(314)
    }

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Tensor {
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        Tensor::new(vec![n, d], (0..n * d).map(|_| normal.sample(rng)).collect()).unwrap()
    }

    #[test]
    fn zero_weight_encoder_outputs_bias() {
        let enc = vec![(
            Tensor::matrix(3, 2, vec![0.0; 6]).unwrap(),
            Tensor::vector(vec![0.7, -0.3]),
        )];
        let dec = vec![(
            Tensor::matrix(2, 3, vec![0.0; 6]).unwrap(),
            Tensor::vector(vec![0.0; 3]),
        )];
        let params = ModelParams::from_layers(enc, dec).unwrap();
        let x = Tensor::matrix(4, 3, vec![0.25; 12]).unwrap();
        let z = params.encode(&x).unwrap();
        for i in 0..4 {
            assert_eq!(z.row(i), &[0.7, -0.3]);
        }
    }

    #[test]
    fn encode_decode_shape_contract() {
        let params = ModelParams::new(12, &[8, 5], 3, &mut rng()).unwrap();
        let z = random_batch(&mut rng(), 6, 3);
        let x_hat = params.decode(&z).unwrap();
        assert_eq!(x_hat.shape(), &[6, 12]);
        assert!(x_hat.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let z2 = params.encode(&x_hat).unwrap();
        assert_eq!(z2.shape(), &[6, 3]);
    }

    #[test]
    fn encode_rejects_width_mismatch() {
        let params = ModelParams::new(12, &[8], 3, &mut rng()).unwrap();
        let x = Tensor::matrix(2, 5, vec![0.0; 10]).unwrap();
        assert!(params.encode(&x).is_err());
    }

    #[test]
    fn taped_forward_matches_plain_forward() {
        let params = ModelParams::new(10, &[7], 2, &mut rng()).unwrap();
        let mut r = rng();
        let x = Tensor::new(
            vec![5, 10],
            (0..50).map(|_| r.random_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let z_plain = params.encode(&x).unwrap();
        let xh_plain = params.decode(&z_plain).unwrap();

        let mut tape = Tape::new();
        let taped = params.on_tape(&mut tape, false);
        let xv = tape.leaf(x);
        let z = taped.encode(&mut tape, xv).unwrap();
        let xh = taped.decode(&mut tape, z).unwrap();
        assert_eq!(tape.value(z).values(), z_plain.values());
        assert_eq!(tape.value(xh).values(), xh_plain.values());
    }

    #[test]
    fn reconstruction_loss_hand_cases() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::matrix(1, 1, vec![1.0]).unwrap());
        let xh_same = tape.leaf(Tensor::matrix(1, 1, vec![1.0]).unwrap());
        let zero = reconstruction_loss(&mut tape, x, xh_same).unwrap();
        assert_eq!(tape.value(zero).item().unwrap(), 0.0);

        let xh_zero = tape.leaf(Tensor::matrix(1, 1, vec![0.0]).unwrap());
        let one = reconstruction_loss(&mut tape, x, xh_zero).unwrap();
        assert_eq!(tape.value(one).item().unwrap(), 1.0);
    }

    #[test]
    fn reconstruction_loss_matches_naive_loop() {
        let mut r = rng();
        let x = random_batch(&mut r, 3, 8);
        let xh = random_batch(&mut r, 3, 8);
        let naive = x
            .values()
            .iter()
            .zip(xh.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / 24.0;
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let xhv = tape.leaf(xh.clone());
        let loss = reconstruction_loss(&mut tape, xv, xhv).unwrap();
        assert!((tape.value(loss).item().unwrap() - naive).abs() <= 1e-12);
        assert!((mse(&x, &xh).unwrap() - naive).abs() <= 1e-12);
    }

    #[test]
    fn recon_gradient_wrt_first_layer_matches_fd() {
        let params = ModelParams::new(6, &[5], 2, &mut rng()).unwrap();
        let mut r = rng();
        let x = Tensor::new(vec![4, 6], (0..24).map(|_| r.random_range(0.0..1.0)).collect()).unwrap();

        let mut tape = Tape::new();
        let taped = params.on_tape(&mut tape, true);
        let xv = tape.leaf(x.clone());
        let z = taped.encode(&mut tape, xv).unwrap();
        let xh = taped.decode(&mut tape, z).unwrap();
        let loss = reconstruction_loss(&mut tape, xv, xh).unwrap();
        tape.backward(loss).unwrap();
        let first_w = taped.param_vars()[0];
        let analytic = tape.grad(first_w).unwrap().to_vec();

        let base_w = params.params()[0].values().to_vec();
        let f = |wv: &[f64]| {
            let mut p = params.clone();
            p.params_mut()[0].values_mut().copy_from_slice(wv);
            let z = p.encode(&x).unwrap();
            let xh = p.decode(&z).unwrap();
            mse(&x, &xh).unwrap()
        };
        let numeric = fd_grad(f, &base_w, 1e-5);
        let err = max_rel_err(&analytic, &numeric);
        assert!(err <= 1e-4, "first-layer gradcheck rel err {err}");
    }

    #[test]
    fn batch_stats_hand_cases() {
        let same = Tensor::matrix(2, 2, vec![1.5, -0.5, 1.5, -0.5]).unwrap();
        let stats = batch_stats(&same).unwrap();
        assert_eq!(stats.cov.values(), &[0.0, 0.0, 0.0, 0.0]);

        let z = Tensor::matrix(2, 2, vec![0.0, 0.0, 2.0, 0.0]).unwrap();
        let stats = batch_stats(&z).unwrap();
        assert_eq!(stats.mean.values(), &[1.0, 0.0]);
        assert_eq!(stats.cov.values(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn batch_stats_matches_naive_two_pass() {
        let mut r = rng();
        let z = random_batch(&mut r, 64, 5);
        let stats = batch_stats(&z).unwrap();
        // independent two-pass loop
        let (n, d) = (64, 5);
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                mean[j] += z.at(i, j);
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        for a in 0..d {
            assert!((stats.mean.values()[a] - mean[a]).abs() <= 1e-12);
            for b in 0..d {
                let mut cov = 0.0;
                for i in 0..n {
                    cov += (z.at(i, a) - mean[a]) * (z.at(i, b) - mean[b]);
                }
                cov /= (n - 1) as f64;
                assert!(
                    (stats.cov.at(a, b) - cov).abs() <= 1e-12,
                    "cov[{a},{b}] mismatch"
                );
            }
        }
    }

    #[test]
    fn batch_stats_needs_two_samples() {
        let z = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(batch_stats(&z).is_err());
    }

    #[test]
    fn batch_kld_zero_for_whitened_latents() {
        // mean 0, unit variance, orthogonal columns
        let a = 1.5_f64.sqrt();
        let z = Tensor::matrix(4, 2, vec![a, 0.0, -a, 0.0, 0.0, a, 0.0, -a]).unwrap();
        let mut tape = Tape::new();
        let zv = tape.param(z);
        let p = batch_kld_loss(&mut tape, zv).unwrap();
        assert!(tape.value(p).item().unwrap().abs() <= 1e-5);
    }

    #[test]
    fn batch_kld_hand_value() {
        // 1-D, mean 0, sample variance 4: 0.5 (4 - 1 - ln 4)
        let z = Tensor::matrix(3, 1, vec![-2.0, 0.0, 2.0]).unwrap();
        let mut tape = Tape::new();
        let zv = tape.param(z);
        let p = batch_kld_loss(&mut tape, zv).unwrap();
        assert_relative_eq!(
            tape.value(p).item().unwrap(),
            0.8068528194400547,
            epsilon = 1e-6
        );
    }

    #[test]
    fn batch_kld_requires_batch_larger_than_dim() {
        let z = Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let mut tape = Tape::new();
        let zv = tape.param(z);
        assert!(matches!(
            batch_kld_loss(&mut tape, zv),
            Err(Error::RegularizerDegenerate(_))
        ));
    }

    #[test]
    fn batch_kld_nonnegative_on_random_batches() {
        let mut r = rng();
        for _ in 0..100 {
            let n = r.random_range(8..32usize);
            let d = r.random_range(2..5usize);
            let z = random_batch(&mut r, n, d);
            let mut tape = Tape::new();
            let zv = tape.param(z);
            let p = batch_kld_loss(&mut tape, zv).unwrap();
            assert!(tape.value(p).item().unwrap() >= 0.0);
        }
    }

    #[test]
    fn batch_kld_gradient_matches_fd() {
        let mut r = rng();
        let z0 = random_batch(&mut r, 9, 3);
        let mut tape = Tape::new();
        let zv = tape.param(z0.clone());
        let p = batch_kld_loss(&mut tape, zv).unwrap();
        tape.backward(p).unwrap();
        let analytic = tape.grad(zv).unwrap().to_vec();

        let f = |v: &[f64]| {
            let z = Tensor::matrix(9, 3, v.to_vec()).unwrap();
            let mut t = Tape::new();
            let zv = t.param(z);
            let p = batch_kld_loss(&mut t, zv).unwrap();
            t.value(p).item().unwrap()
        };
        let numeric = fd_grad(f, z0.values(), 1e-4);
        let err = max_rel_err(&analytic, &numeric);
        assert!(err <= 1e-4, "batch-KLD gradcheck rel err {err}");
    }

    #[test]
    fn total_loss_lambda_zero_equals_reconstruction() {
        let params = ModelParams::new(8, &[6], 2, &mut rng()).unwrap();
        let mut r = rng();
        let x = Tensor::new(vec![5, 8], (0..40).map(|_| r.random_range(0.0..1.0)).collect()).unwrap();
        let prior = PriorSpec::standard_normal(2);

        let mut tape = Tape::new();
        let taped = params.on_tape(&mut tape, true);
        let xv = tape.leaf(x);
        let parts = total_loss(
            &mut tape,
            &taped,
            xv,
            &prior,
            0.0,
            Regularizer::Mmd,
            &KernelSpec::median_heuristic(),
            Estimator::Biased,
            &mut r,
        )
        .unwrap();
        assert_eq!(
            tape.value(parts.total).item().unwrap(),
            tape.value(parts.recon).item().unwrap()
        );
    }

    #[test]
    fn total_loss_rejects_negative_lambda() {
        let params = ModelParams::new(4, &[3], 2, &mut rng()).unwrap();
        let mut tape = Tape::new();
        let taped = params.on_tape(&mut tape, true);
        let xv = tape.leaf(Tensor::matrix(3, 4, vec![0.5; 12]).unwrap());
        let mut r = rng();
        assert!(total_loss(
            &mut tape,
            &taped,
            xv,
            &PriorSpec::standard_normal(2),
            -0.1,
            Regularizer::Mmd,
            &KernelSpec::median_heuristic(),
            Estimator::Biased,
            &mut r,
        )
        .is_err());
    }

    #[test]
    fn small_gradient_step_decreases_reconstruction() {
        let mut params = ModelParams::new(6, &[5], 2, &mut rng()).unwrap();
        let mut r = rng();
        let x = Tensor::new(vec![4, 6], (0..24).map(|_| r.random_range(0.0..1.0)).collect()).unwrap();
        let before = {
            let z = params.encode(&x).unwrap();
            mse(&x, &params.decode(&z).unwrap()).unwrap()
        };
        let mut tape = Tape::new();
        let taped = params.on_tape(&mut tape, true);
        let xv = tape.leaf(x.clone());
        let parts = total_loss(
            &mut tape,
            &taped,
            xv,
            &PriorSpec::standard_normal(2),
            0.0,
            Regularizer::None,
            &KernelSpec::median_heuristic(),
            Estimator::Biased,
            &mut r,
        )
        .unwrap();
        tape.backward(parts.total).unwrap();
        let grads: Vec<Vec<f64>> = taped
            .param_vars()
            .iter()
            .map(|&v| tape.grad(v).unwrap().to_vec())
            .collect();
        for (t, g) in params.params_mut().into_iter().zip(&grads) {
            for (p, gi) in t.values_mut().iter_mut().zip(g) {
                *p -= 1e-3 * gi;
            }
        }
        let after = {
            let z = params.encode(&x).unwrap();
            mse(&x, &params.decode(&z).unwrap()).unwrap()
        };
        assert!(after < before, "descent failed: {before} -> {after}");
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mdlp");
        let params = ModelParams::new(10, &[7, 4], 3, &mut rng()).unwrap();
        save_checkpoint(&path, &params).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, params);
    }

    #[test]
    fn checkpoint_rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mdlp");
        std::fs::write(&path, b"XXXX").unwrap();
        assert!(load_checkpoint(&path).is_err());

        let good = dir.path().join("good.mdlp");
        let params = ModelParams::new(4, &[3], 2, &mut rng()).unwrap();
        save_checkpoint(&good, &params).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn from_layers_validates_chain() {
        let enc = vec![(
            Tensor::matrix(3, 2, vec![0.0; 6]).unwrap(),
            Tensor::vector(vec![0.0; 2]),
        )];
        // decoder expects latent width 2, give 4
        let dec = vec![(
            Tensor::matrix(4, 3, vec![0.0; 12]).unwrap(),
            Tensor::vector(vec![0.0; 3]),
        )];
        assert!(ModelParams::from_layers(enc, dec).is_err());
    }
}
