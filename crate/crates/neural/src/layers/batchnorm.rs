use rand_chacha::ChaCha8Rng;

use super::{Layer, Param};
use crate::error::{NnError, Result};
use crate::tensor::Tensor;

pub const BN_EPSILON: f64 = 1e-5;
/// Weight kept by the running statistics at each training step.
pub const BN_MOMENTUM: f64 = 0.9;

/// Per-channel batch normalization over the last axis. Statistics are taken
/// over every other axis, i.e. batch and time for sequence tensors.
#[derive(Debug)]
pub struct BatchNorm {
    channels: usize,
    gamma: Param,
    beta: Param,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    cache: Option<Cache>,
}

#[derive(Debug)]
struct Cache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    shape: Vec<usize>,
}

impl BatchNorm {
    pub fn new(prefix: &str, channels: usize) -> Self {
        let mut gamma = Param::zeros(format!("{prefix}.gamma"), channels);
        gamma.value.iter_mut().for_each(|g| *g = 1.0);
        Self {
            channels,
            gamma,
            beta: Param::zeros(format!("{prefix}.beta"), channels),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            cache: None,
        }
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() < 2 || *x.shape().last().unwrap() != self.channels {
            return Err(NnError::Shape(format!(
                "batchnorm expects {} channels on the last axis, got shape {:?}",
                self.channels,
                x.shape()
            )));
        }
        Ok(())
    }
}

impl Layer for BatchNorm {
    fn name(&self) -> &str {
        "batchnorm"
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let c = self.channels;
        let scale: Vec<f64> = (0..c).map(|j| self.gamma.value[j] / (self.running_var[j] + BN_EPSILON).sqrt()).collect();
        let mut out = x.data().to_vec();
        for row in out.chunks_exact_mut(c) {
            for j in 0..c {
                row[j] = (row[j] - self.running_mean[j]) * scale[j] + self.beta.value[j];
            }
        }
        Ok(Tensor::with_shape_of(x, out))
    }

    fn forward_train(&mut self, x: &Tensor, _rng: &mut ChaCha8Rng) -> Result<Tensor> {
        self.check(x)?;
        if x.batch() < 2 {
            return Err(NnError::BatchTooSmall);
        }
        let c = self.channels;
        let n = x.len() / c;
        let mut mean = vec![0.0; c];
        for row in x.data().chunks_exact(c) {
            for j in 0..c {
                mean[j] += row[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; c];
        for row in x.data().chunks_exact(c) {
            for j in 0..c {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();

        let mut xhat = x.data().to_vec();
        let mut out = vec![0.0; x.len()];
        for (xr, or) in xhat.chunks_exact_mut(c).zip(out.chunks_exact_mut(c)) {
            for j in 0..c {
                xr[j] = (xr[j] - mean[j]) * inv_std[j];
                or[j] = self.gamma.value[j] * xr[j] + self.beta.value[j];
            }
        }
        for j in 0..c {
            self.running_mean[j] = BN_MOMENTUM * self.running_mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
            self.running_var[j] = BN_MOMENTUM * self.running_var[j] + (1.0 - BN_MOMENTUM) * var[j];
        }
        self.cache = Some(Cache { xhat, inv_std, shape: x.shape().to_vec() });
        Tensor::new(x.shape().to_vec(), out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(NnError::NoForwardCache)?;
        if grad_out.shape() != cache.shape.as_slice() {
            return Err(NnError::Shape("batchnorm gradient shape mismatch".into()));
        }
        let c = self.channels;
        let n = grad_out.len() / c;
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xhat = vec![0.0; c];
        for (gr, xr) in grad_out.data().chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for j in 0..c {
                sum_dy[j] += gr[j];
                sum_dy_xhat[j] += gr[j] * xr[j];
            }
        }
        for j in 0..c {
            self.beta.grad[j] += sum_dy[j];
            self.gamma.grad[j] += sum_dy_xhat[j];
        }
        let nf = n as f64;
        let mut dx = vec![0.0; grad_out.len()];
        for ((dr, gr), xr) in
            dx.chunks_exact_mut(c).zip(grad_out.data().chunks_exact(c)).zip(cache.xhat.chunks_exact(c))
        {
            for j in 0..c {
                let k = self.gamma.value[j] * cache.inv_std[j] / nf;
                dr[j] = k * (nf * gr[j] - sum_dy[j] - xr[j] * sum_dy_xhat[j]);
            }
        }
        Tensor::new(cache.shape.clone(), dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<&Vec<f64>> {
        vec![&self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}
