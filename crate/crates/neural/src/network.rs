use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NnError, Result};
use crate::layers::{BatchNorm, Conv1d, Dense, Dropout, Gru, Layer, Param, Relu};
use crate::loss::softmax;
use crate::spec::{LayerSpec, ModelSpec, SampleShape};
use crate::tensor::Tensor;

/// A sequential network instantiated from a [`ModelSpec`].
pub struct Network {
    spec: ModelSpec,
    layers: Vec<Box<dyn Layer>>,
}

impl std::fmt::Debug for Network {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Network").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Network {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let inputs = spec.layer_inputs()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers: Vec<Box<dyn Layer>> = Vec::with_capacity(spec.layers.len());
        for (i, (layer, input)) in spec.layers.iter().zip(inputs).enumerate() {
            let prefix = format!("layer{i}");
            let width = match input {
                SampleShape::Sequence { channels, .. } => channels,
                SampleShape::Flat { features } => features,
            };
            let built: Box<dyn Layer> = match *layer {
                LayerSpec::Conv1d { kernel, filters } => {
                    Box::new(Conv1d::new(&format!("{prefix}.conv1d"), kernel, width, filters, &mut rng))
                }
                LayerSpec::BatchNorm => Box::new(BatchNorm::new(&format!("{prefix}.batchnorm"), width)),
                LayerSpec::Relu => Box::new(Relu::new()),
                LayerSpec::Gru { units, return_sequences } => {
                    Box::new(Gru::new(&format!("{prefix}.gru"), width, units, return_sequences, &mut rng))
                }
                LayerSpec::Dense { units } => Box::new(Dense::new(&format!("{prefix}.dense"), width, units, &mut rng)),
                LayerSpec::Dropout { rate } => Box::new(Dropout::new(rate)?),
            };
            layers.push(built);
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_classes(&self) -> usize {
        self.spec.n_classes
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (_, t, c) = x.dims3()?;
        if t != self.spec.seq_len || c != self.spec.input_channels {
            return Err(NnError::Shape(format!(
                "model expects (batch, {}, {}), got {:?}",
                self.spec.seq_len,
                self.spec.input_channels,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Inference-mode logits.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    /// Training-mode logits; caches activations for [`Network::backward`].
    pub fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward_train(&h, rng)?;
        }
        Ok(h)
    }

    /// Backpropagates a gradient w.r.t. the logits, accumulating parameter
    /// gradients; returns the gradient w.r.t. the input.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<Tensor> {
        let mut g = grad_logits.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Flat copy of every parameter followed by every buffer, in layer order.
    pub fn state(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for p in layer.params() {
                out.extend_from_slice(&p.value);
            }
            for b in layer.buffers() {
                out.extend_from_slice(b);
            }
        }
        out
    }

    pub fn state_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.params().iter().map(|p| p.value.len()).sum::<usize>()
                    + l.buffers().iter().map(|b| b.len()).sum::<usize>()
            })
            .sum()
    }

    pub fn load_state(&mut self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_len() {
            return Err(NnError::Artifact(format!(
                "state has {} values, model needs {}",
                state.len(),
                self.state_len()
            )));
        }
        let mut pos = 0;
        for layer in &mut self.layers {
            for p in layer.params_mut() {
                let n = p.value.len();
                p.value.copy_from_slice(&state[pos..pos + n]);
                pos += n;
            }
            for b in layer.buffers_mut() {
                let n = b.len();
                b.copy_from_slice(&state[pos..pos + n]);
                pos += n;
            }
        }
        Ok(())
    }

    /// Class probabilities in inference mode, evaluated in chunks.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        const CHUNK: usize = 256;
        let n = x.batch();
        let mut out = Vec::with_capacity(n * self.spec.n_classes);
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let rows: Vec<usize> = (start..end).collect();
            let probs = softmax(&self.logits(&x.select_rows(&rows))?)?;
            out.extend_from_slice(probs.data());
            start = end;
        }
        Tensor::new(vec![n, self.spec.n_classes], out)
    }
}

/// Row-wise argmax with ties resolved to the lowest index.
pub fn argmax_rows(probs: &Tensor) -> Result<Vec<usize>> {
    let (_, n) = probs.dims2()?;
    Ok(probs
        .data()
        .chunks_exact(n)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}
