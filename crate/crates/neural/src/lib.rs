//! Minimal `f64` deep-learning toolkit for short packet sequences: Conv1D,
//! batch normalization, GRU, dense and dropout layers with hand-written
//! backward passes, softmax cross-entropy, Adam, and an early-stopping
//! trainer.

pub mod artifact;
pub mod error;
pub mod gradcheck;
pub mod layers;
mod linalg;
pub mod loss;
pub mod network;
pub mod optim;
pub mod spec;
pub mod tensor;
pub mod train;

pub use error::{NnError, Result};
pub use network::{argmax_rows, Network};
pub use optim::{adam_step, Adam, AdamConfig, AdamState};
pub use spec::{build_baseline_rnn, build_cnn_rnn, CnnRnnWidths, LayerSpec, ModelSpec};
pub use tensor::Tensor;
pub use train::{evaluate, fit, run_with_early_stopping, EpochTrainer, History, SequenceSet, TrainConfig, Validation};
