//! Differentiable layers. Each layer caches what its backward pass needs
//! during `forward_train`; `infer` is side-effect free.

mod activation;
mod batchnorm;
mod conv1d;
mod dense;
mod dropout;
mod gru;

pub use activation::Relu;
pub use batchnorm::BatchNorm;
pub use conv1d::Conv1d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use gru::{gru_cell, Gru, GruParams};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::Tensor;

/// A trainable parameter and its accumulated gradient.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(name: impl Into<String>, len: usize) -> Self {
        Self { name: name.into(), value: vec![0.0; len], grad: vec![0.0; len] }
    }

    /// Glorot-uniform initialization.
    pub fn glorot(name: impl Into<String>, len: usize, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let value = (0..len).map(|_| rng.random_range(-limit..limit)).collect();
        Self { name: name.into(), value, grad: vec![0.0; len] }
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

pub trait Layer: Send + Sync {
    fn name(&self) -> &str;

    /// Forward pass in inference mode.
    fn infer(&self, x: &Tensor) -> Result<Tensor>;

    /// Forward pass in training mode; caches activations for `backward`.
    fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<Tensor>;

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input
    /// of the most recent `forward_train`.
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor>;

    fn params(&self) -> Vec<&Param> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    /// Non-trainable state that must persist with the model (running statistics).
    fn buffers(&self) -> Vec<&Vec<f64>> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        Vec::new()
    }
}
