use rand_chacha::ChaCha8Rng;

use super::Layer;
use crate::error::{NnError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Relu {
    fn name(&self) -> &str {
        "relu"
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let data = x.data().iter().map(|&v| v.max(0.0)).collect();
        Ok(Tensor::with_shape_of(x, data))
    }

    fn forward_train(&mut self, x: &Tensor, _rng: &mut ChaCha8Rng) -> Result<Tensor> {
        self.mask = Some(x.data().iter().map(|&v| v > 0.0).collect());
        self.infer(x)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mask = self.mask.as_ref().ok_or(NnError::NoForwardCache)?;
        if mask.len() != grad_out.len() {
            return Err(NnError::Shape("relu gradient size differs from forward input".into()));
        }
        let data = grad_out.data().iter().zip(mask).map(|(&g, &m)| if m { g } else { 0.0 }).collect();
        Ok(Tensor::with_shape_of(grad_out, data))
    }
}
