use super::forward::ActivationTrace;
use super::pool::max_pool_backward;
use super::{Architecture, LayerSpec, Params};
use crate::error::{Error, Result};
use crate::tensor::{convolve_full_scatter, correlate_valid_acc, gemm, Layout, Tensor};

/// Mean cross-entropy `-(1/n) Σ log p[y]`, with `p` clamped at `1e-12`.
pub fn cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    if probs.shape().len() != 2 || probs.rows() != labels.len() {
        return Err(Error::shape(format!(
            "cross_entropy: {:?} probabilities for {} labels",
            probs.shape(),
            labels.len()
        )));
    }
    let classes = probs.shape()[1];
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::Label { label: y, classes });
        }
        total -= probs.row(i)[y].max(1e-12).ln();
    }
    Ok(total / labels.len() as f64)
}

pub struct ClassificationGrads {
    /// `∇θ L`, averaged over the batch.
    pub params: Params,
    /// Per-sample error at the first layer's output (`δ⁽²⁾`), not batch-averaged.
    pub layer2_error: Tensor,
}

/// Softmax/cross-entropy backprop: seeds `p - onehot(y)` at the output and
/// propagates it to layer 1, returning mean parameter gradients and `δ⁽²⁾`.
pub fn backward_classification(
    arch: &Architecture,
    params: &Params,
    trace: &ActivationTrace,
    labels: &[usize],
) -> Result<ClassificationGrads> {
    let layers = arch.layers();
    if trace.activations.len() != layers.len() + 1 {
        return Err(Error::config("activation trace is incomplete"));
    }
    let probs = trace.probs();
    let n = probs.rows();
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    let mut residual = probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        if y >= arch.classes() {
            return Err(Error::Label { label: y, classes: arch.classes() });
        }
        residual.row_mut(i)[y] -= 1.0;
    }
    let mut grads = params.zeros_like();
    let mut errors = propagate(arch, params, trace, layers.len(), residual, Some(&mut grads), false)?;
    grads.scale(1.0 / n as f64);
    let layer2_error = errors
        .get_mut(1)
        .and_then(Option::take)
        .ok_or_else(|| Error::config("network has no layer-2 activation"))?;
    Ok(ClassificationGrads { params: grads, layer2_error })
}

/// Standard backprop through one trace.
///
/// `error` is the derivative with respect to `activations[top]` (for the
/// output layer, with respect to its logits). Processes layers `top - 1`
/// down to `0`, adding *unscaled* per-batch sums into `grads`, and returns the
/// error at every activation index `1..=top`; index 0 (the input) is filled
/// only when `input_error` is set.
pub(crate) fn propagate(
    arch: &Architecture,
    params: &Params,
    trace: &ActivationTrace,
    top: usize,
    error: Tensor,
    mut grads: Option<&mut Params>,
    input_error: bool,
) -> Result<Vec<Option<Tensor>>> {
    let layers = arch.layers();
    let mut errors: Vec<Option<Tensor>> = vec![None; top + 1];
    let n = trace.batch_size();
    let mut current = error;
    for i in (0..top).rev() {
        let layer = &layers[i];
        let a_in = &trace.activations[i];
        let a_out = &trace.activations[i + 1];
        let need_below = i > 0 || input_error;
        if current.len() != a_out.len() {
            return Err(Error::layer(i, format!("error {:?} for activation {:?}", current.shape(), a_out.shape())));
        }
        errors[i + 1] = Some(current.clone());
        let below = match layer.spec {
            LayerSpec::Dense { units } => {
                let p = params.layers[i].as_ref().ok_or_else(|| Error::layer(i, "missing parameters"))?;
                let fan_in = a_in.row_len();
                let mut dz = current;
                if layer.relu {
                    for (d, a) in dz.data_mut().iter_mut().zip(a_out.data()) {
                        if *a <= 0.0 {
                            *d = 0.0;
                        }
                    }
                }
                if let Some(g) = grads.as_deref_mut() {
                    let g = g.layers[i].as_mut().ok_or_else(|| Error::layer(i, "missing gradient slot"))?;
                    gemm(units, n, fan_in, dz.data(), Layout::Transposed, a_in.data(), Layout::RowMajor, g.weights.data_mut(), true);
                    let gb = g.bias.data_mut();
                    for row in dz.data().chunks(units) {
                        for (b, d) in gb.iter_mut().zip(row) {
                            *b += d;
                        }
                    }
                }
                if need_below {
                    let mut e = vec![0.0; n * fan_in];
                    gemm(n, units, fan_in, dz.data(), Layout::RowMajor, p.weights.data(), Layout::RowMajor, &mut e, false);
                    Some(Tensor::new(a_in.shape().to_vec(), e)?)
                } else {
                    None
                }
            }
            LayerSpec::Conv { maps, height, width } => {
                let p = params.layers[i].as_ref().ok_or_else(|| Error::layer(i, "missing parameters"))?;
                let (cin, h, w) = (layer.input[0], layer.input[1], layer.input[2]);
                let (oh, ow) = (layer.output[1], layer.output[2]);
                let (ksz, osz, isz) = (height * width, oh * ow, h * w);
                let mut dz = current;
                for (d, a) in dz.data_mut().iter_mut().zip(a_out.data()) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
                let mut below = need_below.then(|| Tensor::zeros(a_in.shape()));
                let mut g = match grads.as_deref_mut() {
                    Some(g) => Some(g.layers[i].as_mut().ok_or_else(|| Error::layer(i, "missing gradient slot"))?),
                    None => None,
                };
                for s in 0..n {
                    let input = a_in.row(s);
                    let dz_s = dz.row(s);
                    for j in 0..maps {
                        let dzj = &dz_s[j * osz..(j + 1) * osz];
                        if let Some(g) = g.as_deref_mut() {
                            g.bias.data_mut()[j] += dzj.iter().sum::<f64>();
                            for c in 0..cin {
                                let dst = &mut g.weights.data_mut()[(j * cin + c) * ksz..(j * cin + c + 1) * ksz];
                                correlate_valid_acc(&input[c * isz..(c + 1) * isz], h, w, dzj, oh, ow, dst);
                            }
                        }
                        if let Some(b) = below.as_mut() {
                            let dst_row = b.row_mut(s);
                            for c in 0..cin {
                                let kernel = &p.weights.data()[(j * cin + c) * ksz..(j * cin + c + 1) * ksz];
                                convolve_full_scatter(dzj, oh, ow, kernel, height, width, &mut dst_row[c * isz..(c + 1) * isz]);
                            }
                        }
                    }
                }
                below
            }
            LayerSpec::MaxPool { .. } => {
                let arg = trace.argmax[i].as_ref().ok_or_else(|| Error::layer(i, "missing pooling argmax"))?;
                Some(max_pool_backward(&current, arg, a_in.shape()).map_err(|e| Error::layer(i, e.to_string()))?)
            }
            LayerSpec::Dropout { .. } => {
                let mut e = current.reshape(a_in.shape())?;
                if let Some(mask) = &trace.masks.0[i] {
                    for (v, m) in e.data_mut().iter_mut().zip(mask.data()) {
                        *v *= m;
                    }
                }
                Some(e)
            }
        };
        match below {
            Some(b) => current = b,
            None => return Ok(errors),
        }
    }
    if input_error {
        errors[0] = Some(current);
    }
    Ok(errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, Mode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cross_entropy_cases() {
        let perfect = Tensor::new(vec![1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        assert!(cross_entropy(&perfect, &[1]).unwrap().abs() < 1e-15);

        let uniform = Tensor::filled(&[2, 5], 0.2);
        assert!((cross_entropy(&uniform, &[0, 4]).unwrap() - 5f64.ln()).abs() < 1e-15);

        let p = Tensor::new(vec![2, 2], vec![0.5, 0.5, 0.75, 0.25]).unwrap();
        let expected = (2f64.ln() + 4f64.ln()) / 2.0;
        assert!((cross_entropy(&p, &[0, 1]).unwrap() - expected).abs() < 1e-15);

        assert!(matches!(cross_entropy(&p, &[0, 2]), Err(Error::Label { label: 2, .. })));
    }

    #[test]
    fn zero_residual_gives_zero_gradients() {
        let arch = Architecture::parse(&[3], "dense:4", 2).unwrap();
        let mut params = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(0));
        // a huge output bias saturates class 0
        params.layers[1].as_mut().unwrap().bias = Tensor::new(vec![2], vec![1e4, -1e4]).unwrap();
        let x = Tensor::filled(&[2, 3], 0.5);
        let trace = forward(&arch, &params, &x, Mode::Train, None, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let g = backward_classification(&arch, &params, &trace, &[0, 0]).unwrap();
        assert!(g.params.flatten().iter().all(|&v| v == 0.0));
        assert!(g.layer2_error.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_batch_keeps_mean_gradients() {
        let arch = Architecture::parse(&[4], "dense:5,dense:3", 3).unwrap();
        let params = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(2));
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::from_fn(&[3, 4], |_| r.random_range(-1.0..1.0));
        let y = [0, 2, 1];
        let x2 = x.select_rows(&[0, 1, 2, 0, 1, 2]);
        let y2 = [0, 2, 1, 0, 2, 1];
        let g1 = {
            let t = forward(&arch, &params, &x, Mode::Eval, None, &mut r).unwrap();
            backward_classification(&arch, &params, &t, &y).unwrap().params.flatten()
        };
        let g2 = {
            let t = forward(&arch, &params, &x2, Mode::Eval, None, &mut r).unwrap();
            backward_classification(&arch, &params, &t, &y2).unwrap().params.flatten()
        };
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
