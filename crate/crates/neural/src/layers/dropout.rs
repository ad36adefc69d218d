use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Layer;
use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Inverted dropout: surviving activations are scaled by `1 / (1 - rate)` in
/// training so inference is the identity.
#[derive(Debug)]
pub struct Dropout {
    rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::InvalidSpec(format!("dropout rate {rate} not in [0, 1)")));
        }
        Ok(Self { rate, mask: None })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl Layer for Dropout {
    fn name(&self) -> &str {
        "dropout"
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.clone())
    }

    fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        if self.rate == 0.0 {
            self.mask = Some(vec![1.0; x.len()]);
            return Ok(x.clone());
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask: Vec<f64> = (0..x.len()).map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 }).collect();
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        self.mask = Some(mask);
        Ok(Tensor::with_shape_of(x, data))
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mask = self.mask.as_ref().ok_or(NnError::NoForwardCache)?;
        if mask.len() != grad_out.len() {
            return Err(NnError::Shape("dropout gradient size differs from forward input".into()));
        }
        let data = grad_out.data().iter().zip(mask).map(|(g, m)| g * m).collect();
        Ok(Tensor::with_shape_of(grad_out, data))
    }
}
