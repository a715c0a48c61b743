use rand::Rng;

use super::pool::max_pool_forward;
use super::{Architecture, LayerSpec, Params};
use crate::error::{Error, Result};
use crate::tensor::{correlate_valid_acc, gemm, Layout, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One mask per layer (`None` except for dropout layers in train mode).
/// Entries are `0` or `1 / keep`, laid out like the layer's activation.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks(pub Vec<Option<Tensor>>);

impl DropoutMasks {
    pub fn none(layers: usize) -> Self {
        DropoutMasks(vec![None; layers])
    }
}

/// Everything one forward pass over a batch produced.
///
/// `activations[0]` is the input batch and `activations[i + 1]` the output of
/// layer `i`; the last entry holds the softmax probabilities.
#[derive(Clone, Debug)]
pub struct ActivationTrace {
    pub activations: Vec<Tensor>,
    /// Pre-activations of learnable layers; the output layer's entry is the logits.
    pub pre_activations: Vec<Option<Tensor>>,
    pub masks: DropoutMasks,
    pub argmax: Vec<Option<Vec<usize>>>,
    pub mode: Mode,
}

impl ActivationTrace {
    pub fn batch_size(&self) -> usize {
        self.activations[0].rows()
    }

    pub fn input(&self) -> &Tensor {
        &self.activations[0]
    }

    pub fn probs(&self) -> &Tensor {
        self.activations.last().expect("trace has an output")
    }

    /// Last hidden layer's activation for `arch`, shaped `[n, ...]`.
    pub fn embedding(&self, arch: &Architecture) -> &Tensor {
        &self.activations[arch.embedding_index()]
    }

    pub fn predictions(&self) -> Vec<usize> {
        let probs = self.probs();
        (0..probs.rows()).map(|i| argmax(probs.row(i))).collect()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn relu(z: &Tensor) -> Tensor {
    z.map(|v| v.max(0.0))
}

/// Derivative of ReLU expressed through its output: 1 where `a > 0`, else 0.
pub fn relu_grad(a: &Tensor) -> Tensor {
    a.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

/// Row-wise softmax of an `[n, c]` tensor, computed with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

fn batch_shape(n: usize, features: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(features.len() + 1);
    s.push(n);
    s.extend_from_slice(features);
    s
}

/// Standard forward pass. In train mode dropout masks are taken from `masks`
/// when given, otherwise sampled from `rng`; in eval mode dropout is the
/// identity (inverted dropout scales at train time).
pub fn forward(
    arch: &Architecture,
    params: &Params,
    x: &Tensor,
    mode: Mode,
    masks: Option<&DropoutMasks>,
    rng: &mut impl Rng,
) -> Result<ActivationTrace> {
    let layers = arch.layers();
    if x.row_len() != arch.input_len() {
        return Err(Error::layer(
            0,
            format!("input has {} features per sample, network expects {:?}", x.row_len(), arch.input_shape()),
        ));
    }
    if params.layers.len() != layers.len() {
        return Err(Error::config("parameters do not match architecture"));
    }
    if let Some(m) = masks {
        if m.0.len() != layers.len() {
            return Err(Error::config("dropout masks do not match architecture"));
        }
    }
    let n = x.rows();
    let mut activations = Vec::with_capacity(layers.len() + 1);
    activations.push(x.clone().reshape(&batch_shape(n, arch.input_shape()))?);
    let mut pre_activations = vec![None; layers.len()];
    let mut used_masks = DropoutMasks::none(layers.len());
    let mut argmaxes = vec![None; layers.len()];

    for (i, layer) in layers.iter().enumerate() {
        let a = activations.last().expect("non-empty");
        let out = match layer.spec {
            LayerSpec::Dense { units } => {
                let p = params.layers[i].as_ref().ok_or_else(|| Error::layer(i, "missing dense parameters"))?;
                let fan_in = a.row_len();
                if p.weights.shape() != [units, fan_in] {
                    return Err(Error::layer(i, format!("weights {:?} for input width {fan_in}", p.weights.shape())));
                }
                let mut z = vec![0.0; n * units];
                gemm(n, fan_in, units, a.data(), Layout::RowMajor, p.weights.data(), Layout::Transposed, &mut z, false);
                for row in z.chunks_mut(units) {
                    for (v, b) in row.iter_mut().zip(p.bias.data()) {
                        *v += b;
                    }
                }
                let z = Tensor::new(vec![n, units], z)?;
                let out = if layer.relu { relu(&z) } else { softmax_rows(&z) };
                pre_activations[i] = Some(z);
                out
            }
            LayerSpec::Conv { maps, height, width } => {
                let p = params.layers[i].as_ref().ok_or_else(|| Error::layer(i, "missing conv parameters"))?;
                let (cin, h, w) = (layer.input[0], layer.input[1], layer.input[2]);
                let (oh, ow) = (layer.output[1], layer.output[2]);
                if p.weights.shape() != [maps, cin, height, width] {
                    return Err(Error::layer(i, format!("filter bank {:?} for {cin} input maps", p.weights.shape())));
                }
                let ksz = height * width;
                let mut z = vec![0.0; n * maps * oh * ow];
                for s in 0..n {
                    let sample = a.row(s);
                    for j in 0..maps {
                        let dst = &mut z[(s * maps + j) * oh * ow..(s * maps + j + 1) * oh * ow];
                        dst.fill(p.bias.data()[j]);
                        for c in 0..cin {
                            let kernel = &p.weights.data()[(j * cin + c) * ksz..(j * cin + c + 1) * ksz];
                            correlate_valid_acc(&sample[c * h * w..(c + 1) * h * w], h, w, kernel, height, width, dst);
                        }
                    }
                }
                let z = Tensor::new(batch_shape(n, &layer.output), z)?;
                let out = relu(&z);
                pre_activations[i] = Some(z);
                out
            }
            LayerSpec::MaxPool { window } => {
                let (pooled, arg) = max_pool_forward(a, window).map_err(|e| Error::layer(i, e.to_string()))?;
                argmaxes[i] = Some(arg);
                pooled
            }
            LayerSpec::Dropout { keep } => match mode {
                Mode::Eval => a.clone(),
                Mode::Train => {
                    let mask = match masks.and_then(|m| m.0[i].as_ref()) {
                        Some(m) if m.shape() == a.shape() => m.clone(),
                        Some(m) => {
                            return Err(Error::layer(i, format!("dropout mask {:?} for activation {:?}", m.shape(), a.shape())))
                        }
                        None => {
                            let scale = 1.0 / keep;
                            Tensor::from_fn(a.shape(), |_| if rng.random::<f64>() < keep { scale } else { 0.0 })
                        }
                    };
                    let mut out = a.clone();
                    for (v, m) in out.data_mut().iter_mut().zip(mask.data()) {
                        *v *= m;
                    }
                    used_masks.0[i] = Some(mask);
                    out
                }
            },
        };
        activations.push(out);
    }

    Ok(ActivationTrace {
        activations,
        pre_activations,
        masks: used_masks,
        argmax: argmaxes,
        mode,
    })
}
