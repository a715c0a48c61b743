//! Batched evaluation-mode passes over whole sample sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adversarial::{gen_adversarial_batch, loss_input_gradient, PerturbationConfig};
use crate::embedding::{manifold_distance, ManifoldDistance};
use crate::error::{Error, Result};
use crate::network::{forward, Architecture, Mode, Params};
use crate::tensor::Tensor;

pub const EVAL_BATCH: usize = 500;

fn chunks(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).step_by(EVAL_BATCH).map(move |s| (s..(s + EVAL_BATCH).min(n)).collect())
}

// Eval-mode forward passes draw nothing from the generator.
fn idle_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

fn concat_rows(parts: Vec<Tensor>, rows: usize) -> Result<Tensor> {
    let mut shape = parts.first().map(|p| p.shape().to_vec()).unwrap_or_else(|| vec![0]);
    shape[0] = rows;
    let data = parts.into_iter().flat_map(Tensor::into_data).collect();
    Tensor::new(shape, data)
}

pub fn predict(arch: &Architecture, params: &Params, x: &Tensor) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(x.rows());
    for idx in chunks(x.rows()) {
        let t = forward(arch, params, &x.select_rows(&idx), Mode::Eval, None, &mut idle_rng())?;
        out.extend(t.predictions());
    }
    Ok(out)
}

pub fn accuracy(arch: &Architecture, params: &Params, x: &Tensor, labels: &[usize]) -> Result<f64> {
    if labels.len() != x.rows() || labels.is_empty() {
        return Err(Error::shape(format!("{} labels for {} samples", labels.len(), x.rows())));
    }
    let hits = predict(arch, params, x)?.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Last-hidden-layer activations `a⁽ᴸ⁾`, `[N, D]`.
pub fn embeddings(arch: &Architecture, params: &Params, x: &Tensor) -> Result<Tensor> {
    let d = arch.embedding_len();
    let mut parts = Vec::new();
    for idx in chunks(x.rows()) {
        let t = forward(arch, params, &x.select_rows(&idx), Mode::Eval, None, &mut idle_rng())?;
        let e = t.embedding(arch);
        parts.push(Tensor::new(vec![e.rows(), d], e.data().to_vec())?);
    }
    concat_rows(parts, x.rows())
}

/// Adversarial counterparts crafted against `params` from eval-mode input
/// gradients.
pub fn adversarial_set(
    arch: &Architecture,
    params: &Params,
    x: &Tensor,
    labels: &[usize],
    cfg: &PerturbationConfig,
) -> Result<Tensor> {
    if labels.len() != x.rows() {
        return Err(Error::shape(format!("{} labels for {} samples", labels.len(), x.rows())));
    }
    let mut parts = Vec::new();
    for idx in chunks(x.rows()) {
        let xb = x.select_rows(&idx);
        let yb: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let (_, grad) = loss_input_gradient(arch, params, &xb, &yb, Mode::Eval, None, &mut idle_rng())?;
        parts.push(gen_adversarial_batch(&xb, &grad, cfg)?.0);
    }
    concat_rows(parts, x.rows())
}

/// Accuracy on adversarial counterparts at level `beta`; `beta = 0` is the
/// clean accuracy.
pub fn adversarial_accuracy(
    arch: &Architecture,
    params: &Params,
    x: &Tensor,
    labels: &[usize],
    beta: f64,
    template: &PerturbationConfig,
) -> Result<f64> {
    if beta == 0.0 {
        return accuracy(arch, params, x, labels);
    }
    PerturbationConfig::new(beta)?;
    let cfg = PerturbationConfig { beta, ..template.clone() };
    accuracy(arch, params, &adversarial_set(arch, params, x, labels, &cfg)?, labels)
}

/// Mean `‖a⁽ᴸ⁾ − a′⁽ᴸ⁾‖₂` between a set and its adversarial counterparts.
pub fn probe_distance(
    arch: &Architecture,
    params: &Params,
    x: &Tensor,
    labels: &[usize],
    cfg: &PerturbationConfig,
) -> Result<ManifoldDistance> {
    let adv = adversarial_set(arch, params, x, labels, cfg)?;
    manifold_distance(&embeddings(arch, params, x)?, &embeddings(arch, params, &adv)?)
}
