//! Declarative model descriptions and the two reference architectures.

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d { kernel: usize, filters: usize },
    BatchNorm,
    Relu,
    Gru { units: usize, return_sequences: bool },
    Dense { units: usize },
    Dropout { rate: f64 },
}

/// Ordered layer list plus input geometry. The last layer is a `Dense` whose
/// width is the class count; its outputs are logits and softmax is applied by
/// the loss and by `predict_proba`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub seq_len: usize,
    pub input_channels: usize,
    pub n_classes: usize,
    pub layers: Vec<LayerSpec>,
}

/// Shape of one sample flowing between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleShape {
    Sequence { time: usize, channels: usize },
    Flat { features: usize },
}

impl ModelSpec {
    /// Walks the layers and returns each layer's input shape, checking that
    /// adjacent layers compose and the output width equals `n_classes`.
    pub fn layer_inputs(&self) -> Result<Vec<SampleShape>> {
        if self.n_classes == 0 {
            return Err(NnError::InvalidSpec("n_classes must be at least 1".into()));
        }
        let mut shape = SampleShape::Sequence { time: self.seq_len, channels: self.input_channels };
        let mut inputs = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            inputs.push(shape);
            shape = match (layer, shape) {
                (LayerSpec::Conv1d { kernel, filters }, SampleShape::Sequence { time, .. }) => {
                    if *kernel == 0 || *filters == 0 {
                        return Err(NnError::InvalidSpec(format!("layer {i}: empty conv1d")));
                    }
                    if time < *kernel {
                        return Err(NnError::InvalidSpec(format!(
                            "layer {i}: sequence length {time} shorter than kernel {kernel} (input length must be at least {})",
                            self.min_seq_len()
                        )));
                    }
                    SampleShape::Sequence { time: time - kernel + 1, channels: *filters }
                }
                (LayerSpec::Gru { units, return_sequences }, SampleShape::Sequence { time, .. }) => {
                    if *return_sequences {
                        SampleShape::Sequence { time, channels: *units }
                    } else {
                        SampleShape::Flat { features: *units }
                    }
                }
                (LayerSpec::Dense { units }, SampleShape::Flat { .. }) => SampleShape::Flat { features: *units },
                (LayerSpec::BatchNorm | LayerSpec::Relu, s) => s,
                (LayerSpec::Dropout { rate }, s) => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(NnError::InvalidSpec(format!("layer {i}: dropout rate {rate}")));
                    }
                    s
                }
                (l, s) => {
                    return Err(NnError::InvalidSpec(format!("layer {i}: {l:?} cannot follow shape {s:?}")));
                }
            };
        }
        match (self.layers.last(), shape) {
            (Some(LayerSpec::Dense { .. }), SampleShape::Flat { features }) if features == self.n_classes => Ok(inputs),
            _ => Err(NnError::InvalidSpec(format!("final layer must be Dense with {} units", self.n_classes))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layer_inputs().map(|_| ())
    }

    /// Smallest input length the convolution stack accepts.
    pub fn min_seq_len(&self) -> usize {
        1 + self
            .layers
            .iter()
            .map(|l| match l {
                LayerSpec::Conv1d { kernel, .. } => kernel - 1,
                _ => 0,
            })
            .sum::<usize>()
    }

    /// Number of trainable parameters (running statistics excluded).
    pub fn param_count(&self) -> Result<usize> {
        let inputs = self.layer_inputs()?;
        Ok(self
            .layers
            .iter()
            .zip(inputs)
            .map(|(layer, input)| {
                let width = match input {
                    SampleShape::Sequence { channels, .. } => channels,
                    SampleShape::Flat { features } => features,
                };
                match layer {
                    LayerSpec::Conv1d { kernel, filters } => kernel * width * filters + filters,
                    LayerSpec::BatchNorm => 2 * width,
                    LayerSpec::Gru { units, .. } => 3 * units * (width + units + 1),
                    LayerSpec::Dense { units } => width * units + units,
                    LayerSpec::Relu | LayerSpec::Dropout { .. } => 0,
                }
            })
            .sum())
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, LayerSpec::Dropout { .. }))
    }
}

/// Layer widths of the CNN-GRU classifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnRnnWidths {
    pub kernel: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub gru_units: usize,
    pub dense_units: usize,
    pub dropout_rate: f64,
}

impl CnnRnnWidths {
    /// Full-size widths: 3-wide kernels with 200 and 400 filters, 200 GRU
    /// units, 200 dense units.
    pub const FULL: CnnRnnWidths = CnnRnnWidths {
        kernel: 3,
        conv1_filters: 200,
        conv2_filters: 400,
        gru_units: 200,
        dense_units: 200,
        dropout_rate: 0.5,
    };

    /// Reduced widths for CPU-scale experiments.
    pub const SMALL: CnnRnnWidths = CnnRnnWidths {
        kernel: 3,
        conv1_filters: 32,
        conv2_filters: 64,
        gru_units: 32,
        dense_units: 200,
        dropout_rate: 0.5,
    };
}

impl Default for CnnRnnWidths {
    fn default() -> Self {
        Self::FULL
    }
}

/// Conv1D -> BN -> ReLU -> Conv1D -> BN -> ReLU -> GRU -> Dense(ReLU) -> [Dropout] -> Dense(n).
pub fn build_cnn_rnn(
    n_classes: usize,
    seq_len: usize,
    input_channels: usize,
    widths: &CnnRnnWidths,
    dropout: bool,
) -> Result<ModelSpec> {
    let mut layers = vec![
        LayerSpec::Conv1d { kernel: widths.kernel, filters: widths.conv1_filters },
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
        LayerSpec::Conv1d { kernel: widths.kernel, filters: widths.conv2_filters },
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
        LayerSpec::Gru { units: widths.gru_units, return_sequences: false },
        LayerSpec::Dense { units: widths.dense_units },
        LayerSpec::Relu,
    ];
    if dropout {
        layers.push(LayerSpec::Dropout { rate: widths.dropout_rate });
    }
    layers.push(LayerSpec::Dense { units: n_classes });
    let spec = ModelSpec { seq_len, input_channels, n_classes, layers };
    spec.validate()?;
    Ok(spec)
}

/// Two stacked GRUs followed by the softmax output layer.
pub fn build_baseline_rnn(n_classes: usize, seq_len: usize, input_channels: usize, hidden: usize) -> Result<ModelSpec> {
    let spec = ModelSpec {
        seq_len,
        input_channels,
        n_classes,
        layers: vec![
            LayerSpec::Gru { units: hidden, return_sequences: true },
            LayerSpec::Gru { units: hidden, return_sequences: false },
            LayerSpec::Dense { units: n_classes },
        ],
    };
    spec.validate()?;
    Ok(spec)
}

pub const BASELINE_HIDDEN: usize = 100;
