use rand_chacha::ChaCha8Rng;

use super::{Layer, Param};
use crate::error::{NnError, Result};
use crate::linalg::gemm;
use crate::tensor::Tensor;

/// Fully connected layer on `(batch, features)` tensors. Weight layout is
/// `(inputs, units)` row-major.
#[derive(Debug)]
pub struct Dense {
    inputs: usize,
    units: usize,
    weight: Param,
    bias: Param,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(prefix: &str, inputs: usize, units: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            inputs,
            units,
            weight: Param::glorot(format!("{prefix}.weight"), inputs * units, inputs, units, rng),
            bias: Param::zeros(format!("{prefix}.bias"), units),
            input: None,
        }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    fn compute(&self, x: &Tensor) -> Result<Tensor> {
        let (b, f) = x.dims2()?;
        if f != self.inputs {
            return Err(NnError::Shape(format!("dense expects {} inputs, got {f}", self.inputs)));
        }
        let mut out = Vec::with_capacity(b * self.units);
        for _ in 0..b {
            out.extend_from_slice(&self.bias.value);
        }
        gemm(
            false,
            false,
            b,
            self.units,
            f,
            1.0,
            x.data(),
            f,
            &self.weight.value,
            self.units,
            1.0,
            &mut out,
            self.units,
        );
        Tensor::new(vec![b, self.units], out)
    }
}

impl Layer for Dense {
    fn name(&self) -> &str {
        "dense"
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
        let (b, f) = x.dims2()?;
        let (gb, gu) = grad_out.dims2()?;
        if gb != b || gu != self.units {
            return Err(NnError::Shape("dense gradient shape mismatch".into()));
        }
        let g = grad_out.data();
        gemm(true, false, f, self.units, b, 1.0, x.data(), f, g, self.units, 1.0, &mut self.weight.grad, self.units);
        for row in g.chunks_exact(self.units) {
            for (acc, v) in self.bias.grad.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut dx = vec![0.0; b * f];
        gemm(false, true, b, f, self.units, 1.0, g, self.units, &self.weight.value, self.units, 0.0, &mut dx, f);
        Tensor::new(vec![b, f], dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
