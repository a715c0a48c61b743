//! The manifold loss and its two-branch backward pass.
//!
//! `Φ = (1/2n) Σₙ ‖a⁽ᴸ⁾ₙ − a′⁽ᴸ⁾ₙ‖²` compares the last hidden layer's
//! activations on clean inputs and on their adversarial counterparts. Its
//! gradient is carried down both traces at once: the clean branch starts
//! from `δ₁ = −(a′ − a)` and the adversarial branch from `δ₂ = −(a − a′)`;
//! every learnable layer adds both branches' contributions, and the `1/n`
//! batch factor is applied here exactly once.
//!
//! The adversarial inputs are constants for this pass: no gradient flows
//! through their dependence on the parameters.

use crate::error::{Error, Result};
use crate::network::{max_pool_backward, ActivationTrace, Architecture, LayerSpec, Params};
use crate::tensor::{convolve_full_scatter, correlate_valid_acc, gemm, Layout, Tensor};

/// Clean and adversarial traces produced with the same parameters.
#[derive(Clone, Debug)]
pub struct DualTrace {
    pub clean: ActivationTrace,
    pub adv: ActivationTrace,
    /// Both passes used identical dropout masks.
    pub shared_masks: bool,
}

impl DualTrace {
    pub fn new(clean: ActivationTrace, adv: ActivationTrace) -> Result<Self> {
        if clean.activations.len() != adv.activations.len() {
            return Err(Error::config("clean and adversarial traces cover different layers"));
        }
        if clean.batch_size() != adv.batch_size() {
            return Err(Error::shape(format!(
                "clean batch of {} vs adversarial batch of {}",
                clean.batch_size(),
                adv.batch_size()
            )));
        }
        let shared_masks = clean.masks == adv.masks;
        Ok(DualTrace { clean, adv, shared_masks })
    }
}

/// Error terms `δ₁` (clean branch) and `δ₂` (adversarial branch) at layer L.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSignals {
    pub clean: Tensor,
    pub adv: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveConfig {
    /// `λ`, the L2 weight-decay coefficient.
    pub weight_decay: f64,
    /// `λ_m`, the manifold-loss weight.
    pub manifold_weight: f64,
    /// Iteration at which the manifold term switches on.
    pub manifold_start: usize,
}

impl ObjectiveConfig {
    pub fn new(weight_decay: f64, manifold_weight: f64, manifold_start: usize) -> Result<Self> {
        if !(weight_decay >= 0.0) || !(manifold_weight >= 0.0) {
            return Err(Error::config(format!(
                "objective weights must be >= 0 (λ = {weight_decay}, λ_m = {manifold_weight})"
            )));
        }
        Ok(ObjectiveConfig { weight_decay, manifold_weight, manifold_start })
    }

    pub fn manifold_active(&self, step: usize) -> bool {
        self.manifold_weight > 0.0 && step >= self.manifold_start
    }
}

fn check_pair(a: &Tensor, b: &Tensor, op: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `Φ = (1/2n) Σₙ ‖aₙ − a′ₙ‖²` for `[n, ...]` batches.
pub fn manifold_loss(embedding: &Tensor, adv_embedding: &Tensor) -> Result<f64> {
    check_pair(embedding, adv_embedding, "manifold_loss")?;
    let n = embedding.rows() as f64;
    let sq: f64 = embedding
        .data()
        .iter()
        .zip(adv_embedding.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq / (2.0 * n))
}

/// `δ₁ = −(a′ − a)`, `δ₂ = −(a − a′)`.
pub fn seed_errors(embedding: &Tensor, adv_embedding: &Tensor) -> Result<ErrorSignals> {
    check_pair(embedding, adv_embedding, "seed_errors")?;
    let clean = Tensor::new(
        embedding.shape().to_vec(),
        embedding.data().iter().zip(adv_embedding.data()).map(|(a, b)| -(b - a)).collect(),
    )?;
    let adv = Tensor::new(
        embedding.shape().to_vec(),
        embedding.data().iter().zip(adv_embedding.data()).map(|(a, b)| -(a - b)).collect(),
    )?;
    Ok(ErrorSignals { clean, adv })
}

fn mask_inactive(delta: &mut [f64], activation: &[f64]) {
    for (d, a) in delta.iter_mut().zip(activation) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }
}

/// `∇θΦ` for every learnable layer below the last hidden layer's output.
pub fn backward_manifold(arch: &Architecture, params: &Params, dual: &DualTrace, seeds: &ErrorSignals) -> Result<Params> {
    let top = arch.embedding_index();
    let layers = arch.layers();
    if dual.clean.activations.len() != layers.len() + 1 {
        return Err(Error::config("dual trace is incomplete"));
    }
    let n = dual.clean.batch_size();
    let (clean, adv) = (&dual.clean, &dual.adv);
    check_pair(&seeds.clean, clean.embedding(arch), "clean seed")?;
    check_pair(&seeds.adv, adv.embedding(arch), "adversarial seed")?;

    let mut grads = params.zeros_like();
    let mut d1 = seeds.clean.data().to_vec();
    let mut d2 = seeds.adv.data().to_vec();

    for l in (0..top).rev() {
        let layer = &layers[l];
        let (a_prev, a_prev_adv) = (&clean.activations[l], &adv.activations[l]);
        let (a, a_adv) = (&clean.activations[l + 1], &adv.activations[l + 1]);
        let last = l == 0;
        match layer.spec {
            LayerSpec::Dense { units } => {
                let p = params.layers[l].as_ref().ok_or_else(|| Error::layer(l, "missing parameters"))?;
                let g = grads.layers[l].as_mut().expect("gradient slot mirrors params");
                let fan_in = a_prev.row_len();
                mask_inactive(&mut d1, a.data());
                mask_inactive(&mut d2, a_adv.data());
                // Stack both branches: [δ₁∘g(a); δ₂∘g(a′)] is 2n×units and
                // [a⁽ˡ⁻¹⁾; a′⁽ˡ⁻¹⁾] is 2n×fan_in, so one product gives the sum
                // of the two outer products.
                let stacked_delta = [d1.as_slice(), d2.as_slice()].concat();
                let stacked_input = [a_prev.data(), a_prev_adv.data()].concat();
                gemm(units, 2 * n, fan_in, &stacked_delta, Layout::Transposed, &stacked_input, Layout::RowMajor, g.weights.data_mut(), false);
                let gb = g.bias.data_mut();
                for row in stacked_delta.chunks(units) {
                    for (b, d) in gb.iter_mut().zip(row) {
                        *b += d;
                    }
                }
                if !last {
                    let mut below = vec![0.0; 2 * n * fan_in];
                    gemm(2 * n, units, fan_in, &stacked_delta, Layout::RowMajor, p.weights.data(), Layout::RowMajor, &mut below, false);
                    d2 = below.split_off(n * fan_in);
                    d1 = below;
                }
            }
            LayerSpec::Conv { maps, height, width } => {
                let p = params.layers[l].as_ref().ok_or_else(|| Error::layer(l, "missing parameters"))?;
                let g = grads.layers[l].as_mut().expect("gradient slot mirrors params");
                let (cin, h, w) = (layer.input[0], layer.input[1], layer.input[2]);
                let (oh, ow) = (layer.output[1], layer.output[2]);
                let (ksz, osz, isz) = (height * width, oh * ow, h * w);
                mask_inactive(&mut d1, a.data());
                mask_inactive(&mut d2, a_adv.data());
                let mut below1 = vec![0.0; if last { 0 } else { n * cin * isz }];
                let mut below2 = below1.clone();
                for (delta, input, below) in [(&d1, a_prev, &mut below1), (&d2, a_prev_adv, &mut below2)] {
                    for s in 0..n {
                        let x = input.row(s);
                        for j in 0..maps {
                            let dz = &delta[(s * maps + j) * osz..(s * maps + j + 1) * osz];
                            g.bias.data_mut()[j] += dz.iter().sum::<f64>();
                            for c in 0..cin {
                                let at = (j * cin + c) * ksz;
                                // filter gradient: a⁽ˡ⁻¹⁾ᵢ * (δⱼ ∘ g(aⱼ))
                                correlate_valid_acc(&x[c * isz..(c + 1) * isz], h, w, dz, oh, ow, &mut g.weights.data_mut()[at..at + ksz]);
                                if !last {
                                    let dst = &mut below[(s * cin + c) * isz..(s * cin + c + 1) * isz];
                                    convolve_full_scatter(dz, oh, ow, &p.weights.data()[at..at + ksz], height, width, dst);
                                }
                            }
                        }
                    }
                }
                d1 = below1;
                d2 = below2;
            }
            LayerSpec::MaxPool { .. } => {
                if !last {
                    let route = |delta: &[f64], trace: &ActivationTrace| -> Result<Vec<f64>> {
                        let arg = trace.argmax[l].as_ref().ok_or_else(|| Error::layer(l, "missing pooling argmax"))?;
                        let e = Tensor::new(trace.activations[l + 1].shape().to_vec(), delta.to_vec())?;
                        Ok(max_pool_backward(&e, arg, trace.activations[l].shape())?.into_data())
                    };
                    d1 = route(&d1, clean)?;
                    d2 = route(&d2, adv)?;
                }
            }
            LayerSpec::Dropout { .. } => {
                for (delta, trace) in [(&mut d1, clean), (&mut d2, adv)] {
                    if let Some(mask) = &trace.masks.0[l] {
                        for (d, m) in delta.iter_mut().zip(mask.data()) {
                            *d *= m;
                        }
                    }
                }
            }
        }
    }
    grads.scale(1.0 / n as f64);
    Ok(grads)
}

/// `∇θJ_m = ∇θL + λ·W + λ_m·∇θΦ`, with decay on weights only and the
/// manifold term present only from `cfg.manifold_start` on.
pub fn total_gradient(
    grad_loss: &Params,
    params: &Params,
    grad_manifold: Option<&Params>,
    cfg: &ObjectiveConfig,
    step: usize,
) -> Result<Params> {
    grad_loss.check_layout(params)?;
    let mut total = grad_loss.clone();
    if cfg.weight_decay != 0.0 {
        total.add_scaled_weights(params, cfg.weight_decay)?;
    }
    if cfg.manifold_active(step) {
        if let Some(gphi) = grad_manifold {
            total.add_scaled(gphi, cfg.manifold_weight)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, Mode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loss_cases() {
        let a = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let b = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        assert_eq!(manifold_loss(&a, &b).unwrap(), 1.0);
        assert_eq!(manifold_loss(&a, &a).unwrap(), 0.0);
        assert!(manifold_loss(&a, &Tensor::zeros(&[2, 1])).is_err());

        let mut r = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::from_fn(&[4, 3], |_| r.random_range(-1.0..1.0));
        let y = Tensor::from_fn(&[4, 3], |_| r.random_range(-1.0..1.0));
        let mut oracle = 0.0;
        for i in 0..4 {
            for k in 0..3 {
                let d = x.row(i)[k] - y.row(i)[k];
                oracle += 0.5 * d * d / 4.0;
            }
        }
        assert!((manifold_loss(&x, &y).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn seed_cases() {
        let a = Tensor::new(vec![1, 1], vec![2.0]).unwrap();
        let b = Tensor::new(vec![1, 1], vec![5.0]).unwrap();
        let s = seed_errors(&a, &b).unwrap();
        assert_eq!(s.clean.data(), &[-3.0]);
        assert_eq!(s.adv.data(), &[3.0]);
        let z = seed_errors(&a, &a).unwrap();
        assert!(z.clean.data().iter().chain(z.adv.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn identical_traces_give_zero_gradient() {
        let arch = Architecture::parse(&[1, 6, 6], "conv:2x3x3,pool:2,dense:4,dropout:0.5", 3).unwrap();
        let params = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(1));
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::from_fn(&[2, 36], |_| r.random_range(-1.0..1.0));
        let t = forward(&arch, &params, &x, Mode::Train, None, &mut r).unwrap();
        let dual = DualTrace::new(t.clone(), t).unwrap();
        assert!(dual.shared_masks);
        let seeds = seed_errors(dual.clean.embedding(&arch), dual.adv.embedding(&arch)).unwrap();
        let g = backward_manifold(&arch, &params, &dual, &seeds).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn swapping_branches_leaves_gradient_unchanged() {
        let arch = Architecture::parse(&[5], "dense:7,dense:4", 3).unwrap();
        let params = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(3));
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::from_fn(&[3, 5], |_| r.random_range(-1.0..1.0));
        let xa = x.map(|v| v + 0.1);
        let t = forward(&arch, &params, &x, Mode::Eval, None, &mut r).unwrap();
        let ta = forward(&arch, &params, &xa, Mode::Eval, None, &mut r).unwrap();
        let grad = |a: &ActivationTrace, b: &ActivationTrace| {
            let dual = DualTrace::new(a.clone(), b.clone()).unwrap();
            let seeds = seed_errors(a.embedding(&arch), b.embedding(&arch)).unwrap();
            backward_manifold(&arch, &params, &dual, &seeds).unwrap().flatten()
        };
        for (u, v) in grad(&t, &ta).iter().zip(grad(&ta, &t)) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn total_gradient_cases() {
        let arch = Architecture::parse(&[3], "dense:2", 2).unwrap();
        let params = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(5));
        let mut gl = params.zeros_like();
        let mut gphi = params.zeros_like();
        let mut r = ChaCha8Rng::seed_from_u64(6);
        for l in gl.layers.iter_mut().chain(gphi.layers.iter_mut()).flatten() {
            l.weights.data_mut().iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
            l.bias.data_mut().iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
        }
        let off = ObjectiveConfig::new(0.0, 0.0, 0).unwrap();
        assert_eq!(total_gradient(&gl, &params, Some(&gphi), &off, 10).unwrap(), gl);

        let staged = ObjectiveConfig::new(0.0, 5.0, 100).unwrap();
        assert_eq!(total_gradient(&gl, &params, Some(&gphi), &staged, 99).unwrap(), gl);
        assert_ne!(total_gradient(&gl, &params, Some(&gphi), &staged, 100).unwrap(), gl);

        let c = 0.7;
        let one = total_gradient(&gl, &params, Some(&gphi), &ObjectiveConfig::new(1e-3, c, 0).unwrap(), 0).unwrap();
        let two = total_gradient(&gl, &params, Some(&gphi), &ObjectiveConfig::new(1e-3, 2.0 * c, 0).unwrap(), 0).unwrap();
        let mut expected = one.clone();
        expected.add_scaled(&gphi, c).unwrap();
        for (a, b) in two.flatten().iter().zip(expected.flatten()) {
            assert!((a - b).abs() < 1e-14);
        }

        // decay touches weights, not biases
        let decay = total_gradient(&gl, &params, None, &ObjectiveConfig::new(0.5, 0.0, 0).unwrap(), 0).unwrap();
        let (d0, g0, p0) = (decay.layers[0].as_ref().unwrap(), gl.layers[0].as_ref().unwrap(), params.layers[0].as_ref().unwrap());
        assert_eq!(d0.bias, g0.bias);
        assert!((d0.weights.data()[0] - g0.weights.data()[0] - 0.5 * p0.weights.data()[0]).abs() < 1e-15);

        let other = Params::zeros(&Architecture::parse(&[4], "dense:2", 2).unwrap());
        assert!(total_gradient(&gl, &other, None, &off, 0).is_err());
    }
}
