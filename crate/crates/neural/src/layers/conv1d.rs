use rand_chacha::ChaCha8Rng;

use super::{Layer, Param};
use crate::error::{NnError, Result};
use crate::linalg::gemm;
use crate::tensor::Tensor;

/// Valid (unpadded) 1-D cross-correlation over the time axis.
///
/// Input `(batch, time, channels)`, output `(batch, time - kernel + 1, filters)`.
/// The kernel is stored as `[kernel][channels][filters]`, which makes the
/// window `x[b, s..s+kernel, :]` a contiguous row of length `kernel * channels`
/// and the whole layer one strided matrix product per batch element.
#[derive(Debug)]
pub struct Conv1d {
    kernel_size: usize,
    channels: usize,
    filters: usize,
    weight: Param,
    bias: Param,
    input: Option<Tensor>,
}

impl Conv1d {
    pub fn new(prefix: &str, kernel_size: usize, channels: usize, filters: usize, rng: &mut ChaCha8Rng) -> Self {
        let len = kernel_size * channels * filters;
        Self {
            kernel_size,
            channels,
            filters,
            weight: Param::glorot(format!("{prefix}.kernel"), len, kernel_size * channels, kernel_size * filters, rng),
            bias: Param::zeros(format!("{prefix}.bias"), filters),
            input: None,
        }
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    fn compute(&self, x: &Tensor) -> Result<Tensor> {
        let (b, t, c) = x.dims3()?;
        if c != self.channels {
            return Err(NnError::Shape(format!("conv1d expects {} channels, got {c}", self.channels)));
        }
        if t < self.kernel_size {
            return Err(NnError::SequenceTooShort { len: t, kernel: self.kernel_size });
        }
        let out_t = t - self.kernel_size + 1;
        let f = self.filters;
        let kc = self.kernel_size * c;
        let mut out = Vec::with_capacity(b * out_t * f);
        for _ in 0..b * out_t {
            out.extend_from_slice(&self.bias.value);
        }
        for bi in 0..b {
            let xb = &x.data()[bi * t * c..(bi + 1) * t * c];
            let ob = &mut out[bi * out_t * f..(bi + 1) * out_t * f];
            gemm(false, false, out_t, f, kc, 1.0, xb, c, &self.weight.value, f, 1.0, ob, f);
        }
        Tensor::new(vec![b, out_t, f], out)
    }
}

impl Layer for Conv1d {
    fn name(&self) -> &str {
        "conv1d"
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.compute(x)
    }

    fn forward_train(&mut self, x: &Tensor, _rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let out = self.compute(x)?;
        self.input = Some(x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or(NnError::NoForwardCache)?;
        let (b, t, c) = x.dims3()?;
        let out_t = t - self.kernel_size + 1;
        let f = self.filters;
        let kc = self.kernel_size * c;
        if grad_out.shape() != [b, out_t, f] {
            return Err(NnError::Shape("conv1d gradient shape mismatch".into()));
        }
        let mut dx = vec![0.0; b * t * c];
        let mut cols = vec![0.0; out_t * kc];
        for bi in 0..b {
            let xb = &x.data()[bi * t * c..(bi + 1) * t * c];
            let gb = &grad_out.data()[bi * out_t * f..(bi + 1) * out_t * f];
            gemm(true, false, kc, f, out_t, 1.0, xb, c, gb, f, 1.0, &mut self.weight.grad, f);
            for row in gb.chunks_exact(f) {
                for (acc, v) in self.bias.grad.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            gemm(false, true, out_t, kc, f, 1.0, gb, f, &self.weight.value, f, 0.0, &mut cols, kc);
            let dxb = &mut dx[bi * t * c..(bi + 1) * t * c];
            for s in 0..out_t {
                let dst = &mut dxb[s * c..s * c + kc];
                for (d, v) in dst.iter_mut().zip(&cols[s * kc..(s + 1) * kc]) {
                    *d += v;
                }
            }
        }
        Tensor::new(vec![b, t, c], dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
