//! Layer definitions, parameters, the forward pass and classification backprop.
//!
//! Batches are stored sample-major: a dense activation is `[n, units]`, a
//! convolutional one `[n, maps, height, width]`. A network is a list of hidden
//! layers followed by an implicit fully-connected softmax output layer, so
//! layer index `hidden.len()` is always the output layer.

mod backward;
mod checkpoint;
mod forward;
mod params;
mod pool;

use std::fmt;
use std::str::FromStr;

pub use backward::{backward_classification, cross_entropy, ClassificationGrads};
pub(crate) use backward::propagate;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use forward::{forward, relu, relu_grad, softmax_rows, ActivationTrace, DropoutMasks, Mode};
pub use params::{LayerParams, Params};
pub use pool::{max_pool_backward, max_pool_forward};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerSpec {
    /// Fully-connected layer with ReLU.
    Dense { units: usize },
    /// Valid-mode convolution with ReLU; `maps` filters of `height × width`.
    Conv { maps: usize, height: usize, width: usize },
    /// Non-overlapping `window × window` max pooling.
    MaxPool { window: usize },
    /// Inverted dropout keeping each unit with probability `keep`.
    Dropout { keep: f64 },
}

impl LayerSpec {
    pub fn is_learnable(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv { .. })
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Dense { units } => write!(f, "dense:{units}"),
            LayerSpec::Conv { maps, height, width } => write!(f, "conv:{maps}x{height}x{width}"),
            LayerSpec::MaxPool { window } => write!(f, "pool:{window}"),
            LayerSpec::Dropout { keep } => write!(f, "dropout:{keep}"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("bad layer '{s}' (expected dense:N, conv:MxHxW, pool:N or dropout:P)"));
        let (kind, arg) = s.trim().split_once(':').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(bad);
        match kind.trim() {
            "dense" => Ok(LayerSpec::Dense { units: num(arg)? }),
            "pool" => Ok(LayerSpec::MaxPool { window: num(arg)? }),
            "conv" => {
                let parts: Vec<&str> = arg.split('x').collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                Ok(LayerSpec::Conv {
                    maps: num(parts[0])?,
                    height: num(parts[1])?,
                    width: num(parts[2])?,
                })
            }
            "dropout" => {
                let keep: f64 = arg.trim().parse().map_err(|_| bad())?;
                if !(keep > 0.0 && keep <= 1.0) {
                    return Err(Error::config(format!("dropout keep-probability {keep} not in (0, 1]")));
                }
                Ok(LayerSpec::Dropout { keep })
            }
            _ => Err(bad()),
        }
    }
}

/// A resolved layer: its spec plus input/output feature shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
    /// ReLU follows the linear map (hidden learnable layers only).
    pub relu: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    input: Vec<usize>,
    hidden: Vec<LayerSpec>,
    classes: usize,
    layers: Vec<Layer>,
}

impl Architecture {
    /// `input` is the per-sample feature shape: `[d]` or `[channels, height, width]`.
    pub fn new(input: &[usize], hidden: Vec<LayerSpec>, classes: usize) -> Result<Self> {
        if input.is_empty() || input.iter().any(|&d| d == 0) || !(input.len() == 1 || input.len() == 3) {
            return Err(Error::config(format!("input shape {input:?} must be [d] or [c, h, w]")));
        }
        if classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut shape = input.to_vec();
        for (i, spec) in hidden.iter().enumerate() {
            let out = output_shape(spec, &shape).map_err(|m| Error::layer(i, m))?;
            layers.push(Layer {
                spec: *spec,
                input: shape.clone(),
                output: out.clone(),
                relu: spec.is_learnable(),
            });
            shape = out;
        }
        layers.push(Layer {
            spec: LayerSpec::Dense { units: classes },
            input: shape,
            output: vec![classes],
            relu: false,
        });
        Ok(Architecture {
            input: input.to_vec(),
            hidden,
            classes,
            layers,
        })
    }

    /// Parses a comma-separated hidden-layer list such as `"dense:256, dropout:0.5"`.
    pub fn parse(input: &[usize], hidden: &str, classes: usize) -> Result<Self> {
        let specs = hidden
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<LayerSpec>>>()?;
        Self::new(input, specs, classes)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input
    }

    pub fn input_len(&self) -> usize {
        self.input.iter().product()
    }

    pub fn hidden(&self) -> &[LayerSpec] {
        &self.hidden
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// All layers, output layer included.
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Index of the activation holding the last hidden layer's output.
    pub fn embedding_index(&self) -> usize {
        self.hidden.len()
    }

    pub fn embedding_len(&self) -> usize {
        self.layers[self.hidden.len()].input.iter().product()
    }

    pub fn hidden_string(&self) -> String {
        self.hidden.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    }
}

fn output_shape(spec: &LayerSpec, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
    match *spec {
        LayerSpec::Dense { units } => Ok(vec![units]),
        LayerSpec::Dropout { .. } => Ok(input.to_vec()),
        LayerSpec::Conv { maps, height, width } => match input {
            [_, h, w] if height <= *h && width <= *w => Ok(vec![maps, h - height + 1, w - width + 1]),
            [_, h, w] => Err(format!("kernel {height}x{width} larger than {h}x{w} input")),
            _ => Err(format!("convolution needs a [c, h, w] input, got {input:?}")),
        },
        LayerSpec::MaxPool { window } => match input {
            [c, h, w] if h % window == 0 && w % window == 0 => Ok(vec![*c, h / window, w / window]),
            [_, h, w] => Err(format!("{h}x{w} map not divisible by pool window {window}")),
            _ => Err(format!("pooling needs a [c, h, w] input, got {input:?}")),
        },
    }
}
