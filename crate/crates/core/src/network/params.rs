use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Architecture, LayerSpec};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Weights and biases of one learnable layer.
///
/// Dense weights are `[out, in]`; convolutional filter banks are
/// `[out_maps, in_maps, height, width]` with one bias per output map.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Per-layer parameters, aligned with [`Architecture::layers`]; `None` for
/// pooling and dropout. The same type carries gradients and velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub layers: Vec<Option<LayerParams>>,
}

fn shapes(arch: &Architecture) -> Vec<Option<(Vec<usize>, usize)>> {
    arch.layers()
        .iter()
        .map(|layer| match layer.spec {
            LayerSpec::Dense { units } => Some((vec![units, layer.input.iter().product()], units)),
            LayerSpec::Conv { maps, height, width } => Some((vec![maps, layer.input[0], height, width], maps)),
            _ => None,
        })
        .collect()
}

impl Params {
    /// Zero-mean Gaussian weights with standard deviation `sqrt(2 / fan_in)`, zero biases.
    pub fn init(arch: &Architecture, rng: &mut impl Rng) -> Self {
        let layers = shapes(arch)
            .into_iter()
            .map(|entry| {
                entry.map(|(wshape, nb)| {
                    let fan_in: usize = wshape[1..].iter().product();
                    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                    LayerParams {
                        weights: Tensor::from_fn(&wshape, |_| normal.sample(rng)),
                        bias: Tensor::zeros(&[nb]),
                    }
                })
            })
            .collect();
        Params { layers }
    }

    pub fn zeros(arch: &Architecture) -> Self {
        let layers = shapes(arch)
            .into_iter()
            .map(|entry| {
                entry.map(|(wshape, nb)| LayerParams {
                    weights: Tensor::zeros(&wshape),
                    bias: Tensor::zeros(&[nb]),
                })
            })
            .collect();
        Params { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    l.as_ref().map(|p| LayerParams {
                        weights: Tensor::zeros(p.weights.shape()),
                        bias: Tensor::zeros(p.bias.shape()),
                    })
                })
                .collect(),
        }
    }

    /// Checks these parameters fit `arch` and are finite.
    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        let expected = shapes(arch);
        if expected.len() != self.layers.len() {
            return Err(Error::config(format!(
                "parameters cover {} layers, architecture has {}",
                self.layers.len(),
                expected.len()
            )));
        }
        for (i, (have, want)) in self.layers.iter().zip(expected).enumerate() {
            match (have, want) {
                (None, None) => {}
                (Some(p), Some((wshape, nb))) => {
                    if p.weights.shape() != wshape.as_slice() || p.bias.shape() != [nb] {
                        return Err(Error::layer(
                            i,
                            format!(
                                "parameter shapes {:?}/{:?} do not match {wshape:?}/[{nb}]",
                                p.weights.shape(),
                                p.bias.shape()
                            ),
                        ));
                    }
                    if !p.weights.is_finite() || !p.bias.is_finite() {
                        return Err(Error::layer(i, "non-finite parameter"));
                    }
                }
                _ => return Err(Error::layer(i, "learnable/parameter-free mismatch")),
            }
        }
        Ok(())
    }

    fn zip_mut(&mut self, other: &Params, what: &str, mut f: impl FnMut(&mut Tensor, &Tensor)) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape(format!("{what}: layer counts differ")));
        }
        for (i, (a, b)) in self.layers.iter_mut().zip(&other.layers).enumerate() {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    if a.weights.shape() != b.weights.shape() || a.bias.shape() != b.bias.shape() {
                        return Err(Error::layer(i, format!("{what}: parameter shapes differ")));
                    }
                    f(&mut a.weights, &b.weights);
                    f(&mut a.bias, &b.bias);
                }
                _ => return Err(Error::layer(i, format!("{what}: parameter layout differs"))),
            }
        }
        Ok(())
    }

    /// Errors unless `other` has exactly the same per-layer shapes.
    pub fn check_layout(&self, other: &Params) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("parameter layer counts differ"));
        }
        for (i, (a, b)) in self.layers.iter().zip(&other.layers).enumerate() {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) if a.weights.shape() == b.weights.shape() && a.bias.shape() == b.bias.shape() => {}
                _ => return Err(Error::layer(i, "parameter shapes differ")),
            }
        }
        Ok(())
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &Params, c: f64) -> Result<()> {
        self.zip_mut(other, "add_scaled", |a, b| {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += c * y;
            }
        })
    }

    /// `self += c * weights(other)`; biases untouched (weight decay).
    pub fn add_scaled_weights(&mut self, other: &Params, c: f64) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::shape("add_scaled_weights: layer counts differ"));
        }
        for (i, (a, b)) in self.layers.iter_mut().zip(&other.layers).enumerate() {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => a
                    .weights
                    .add_scaled(&b.weights, c)
                    .map_err(|e| Error::layer(i, e.to_string()))?,
                _ => return Err(Error::layer(i, "add_scaled_weights: parameter layout differs")),
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        for p in self.layers.iter_mut().flatten() {
            p.weights.scale(c);
            p.bias.scale(c);
        }
    }

    /// `Ω(θ) = ½ Σ W²` over weights only.
    pub fn weight_decay(&self) -> f64 {
        0.5 * self.layers.iter().flatten().map(|p| p.weights.sum_squares()).sum::<f64>()
    }

    /// Index of the first layer holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.as_ref().is_some_and(|p| !p.weights.is_finite() || !p.bias.is_finite()))
    }

    pub fn count(&self) -> usize {
        self.layers.iter().flatten().map(|p| p.weights.len() + p.bias.len()).sum()
    }

    /// All scalars in layer order, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.count());
        for p in self.layers.iter().flatten() {
            out.extend_from_slice(p.weights.data());
            out.extend_from_slice(p.bias.data());
        }
        out
    }

    /// Inverse of [`Params::flatten`] for the layout of `arch`.
    pub fn unflatten(arch: &Architecture, values: &[f64]) -> Result<Self> {
        let mut params = Params::zeros(arch);
        if values.len() != params.count() {
            return Err(Error::shape(format!(
                "expected {} parameter values, got {}",
                params.count(),
                values.len()
            )));
        }
        let mut at = 0;
        for p in params.layers.iter_mut().flatten() {
            for t in [&mut p.weights, &mut p.bias] {
                let n = t.len();
                t.data_mut().copy_from_slice(&values[at..at + n]);
                at += n;
            }
        }
        Ok(params)
    }

    /// Mutable access to the `index`-th scalar in [`Params::flatten`] order.
    pub fn scalar_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for p in self.layers.iter_mut().flatten() {
            for t in [&mut p.weights, &mut p.bias] {
                if index < t.len() {
                    return Some(&mut t.data_mut()[index]);
                }
                index -= t.len();
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_matches_geometry() {
        let arch = Architecture::parse(&[1, 6, 6], "conv:2x3x3,pool:2,dense:4", 3).unwrap();
        let params = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(0));
        params.validate(&arch).unwrap();
        let conv = params.layers[0].as_ref().unwrap();
        assert_eq!(conv.weights.shape(), &[2, 1, 3, 3]);
        assert!(params.layers[1].is_none());
        assert_eq!(params.layers[2].as_ref().unwrap().weights.shape(), &[4, 8]);
        assert!(params.layers.iter().flatten().all(|p| p.bias.data().iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn init_std_is_he() {
        let arch = Architecture::parse(&[400], "dense:300", 2).unwrap();
        let params = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(1));
        let w = params.layers[0].as_ref().unwrap().weights.data();
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 2.0 / 400.0).abs() < 0.05 * 2.0 / 400.0, "{var}");
    }

    #[test]
    fn flatten_round_trip() {
        let arch = Architecture::parse(&[5], "dense:7", 4).unwrap();
        let params = Params::init(&arch, &mut ChaCha8Rng::seed_from_u64(2));
        let flat = params.flatten();
        assert_eq!(flat.len(), 5 * 7 + 7 + 7 * 4 + 4);
        assert_eq!(Params::unflatten(&arch, &flat).unwrap(), params);
        let mut p = params.clone();
        *p.scalar_mut(5 * 7 + 7).unwrap() = 42.0;
        assert_eq!(p.layers[1].as_ref().unwrap().weights.data()[0], 42.0);
    }

    #[test]
    fn decay_is_weights_only() {
        let arch = Architecture::parse(&[2], "dense:2", 2).unwrap();
        let mut p = Params::zeros(&arch);
        for l in p.layers.iter_mut().flatten() {
            l.bias.data_mut().fill(3.0);
        }
        assert_eq!(p.weight_decay(), 0.0);
        p.layers[0].as_mut().unwrap().weights.data_mut()[0] = 2.0;
        assert_eq!(p.weight_decay(), 2.0);
    }
}
