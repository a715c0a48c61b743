//! Manifold-regularized neural networks (MRnet).
//!
//! A small `f64` training engine whose backward passes are written out by
//! hand: the standard classification backprop, the input gradient used to
//! craft constant-norm adversarial examples, and the two-branch backprop of
//! the manifold loss `Φ = (1/2n) Σ ‖a⁽ᴸ⁾ − a′⁽ᴸ⁾‖²` between the last hidden
//! layer's clean and adversarial activations.
//!
//! Module map:
//!
//! - [`tensor`]: dense storage, matmul, valid/full convolution, Hadamard product
//! - [`network`]: layers, forward pass, classification backprop, checkpoints
//! - [`adversarial`]: input gradients, adversarial examples, β calibration
//! - [`manifold`]: `Φ`, its error seeds and dual-branch gradients, the total objective gradient
//! - [`optim`]: momentum SGD, the three-stage schedule, the training loop
//! - [`data`]: IDX / CIFAR-10 loaders, ZCA whitening, augmentation, synthetic blobs
//! - [`embedding`]: distance matrices, Dunn index, silhouettes, k-NN retrieval

pub mod adversarial;
pub mod data;
pub mod embedding;
pub mod error;
pub mod manifold;
pub mod network;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
pub use network::{Architecture, LayerSpec, Params};
pub use tensor::Tensor;
