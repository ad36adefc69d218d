//! Mini-batch training with early stopping on a held-out split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::loss::softmax_cross_entropy;
use crate::network::{argmax_rows, Network};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 64, adam: AdamConfig::default(), max_epochs: 100, patience: 5, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(NnError::InvalidConfig("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(NnError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sequence samples `(n, time, channels)` with class labels.
#[derive(Clone, Debug)]
pub struct SequenceSet {
    pub x: Tensor,
    pub y: Vec<usize>,
}

impl SequenceSet {
    pub fn new(x: Tensor, y: Vec<usize>) -> Result<Self> {
        x.dims3()?;
        if x.batch() != y.len() {
            return Err(NnError::Shape(format!("{} samples but {} labels", x.batch(), y.len())));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> SequenceSet {
        SequenceSet { x: self.x.select_rows(rows), y: rows.iter().map(|&r| self.y[r]).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Validation {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// The pieces of a training run the early-stopping driver needs.
pub trait EpochTrainer {
    /// Runs one epoch (1-based index) and returns the mean training loss.
    fn train_epoch(&mut self, epoch: usize) -> Result<f64>;
    fn validate(&mut self) -> Result<Validation>;
    fn snapshot(&self) -> Vec<f64>;
    fn restore(&mut self, state: &[f64]) -> Result<()>;
}

/// Trains until the validation loss has not improved for `patience` epochs or
/// `max_epochs` is reached, then restores the best epoch's state.
pub fn run_with_early_stopping<T: EpochTrainer>(
    trainer: &mut T,
    max_epochs: usize,
    patience: usize,
) -> Result<History> {
    if patience == 0 || max_epochs == 0 {
        return Err(NnError::InvalidConfig("patience and max_epochs must be at least 1".into()));
    }
    let mut history = History::default();
    let mut best_loss = f64::INFINITY;
    let mut best_state = trainer.snapshot();
    let mut wait = 0;
    for epoch in 1..=max_epochs {
        let train_loss = trainer.train_epoch(epoch)?;
        if !train_loss.is_finite() {
            return Err(NnError::Diverged { epoch, loss: train_loss });
        }
        let val = trainer.validate()?;
        if !val.loss.is_finite() {
            return Err(NnError::Diverged { epoch, loss: val.loss });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val.loss);
        history.val_accuracy.push(val.accuracy);
        history.epochs_run = epoch;
        if val.loss < best_loss {
            best_loss = val.loss;
            history.best_epoch = epoch;
            best_state = trainer.snapshot();
            wait = 0;
        } else {
            wait += 1;
            if wait >= patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    trainer.restore(&best_state)?;
    Ok(history)
}

/// Splits `n` shuffled indices into batches, folding a lone trailing sample
/// into the previous batch so batch normalization always sees two or more.
fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() >= 2 && out.last().map(|b| b.len()) == Some(1) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        let last = out.len() - 1;
        out[last] = &order[start..];
    }
    out
}

struct NetworkTrainer<'a> {
    net: &'a mut Network,
    train: &'a SequenceSet,
    val: &'a SequenceSet,
    batch_size: usize,
    optimizer: Adam,
    rng: ChaCha8Rng,
}

impl EpochTrainer for NetworkTrainer<'_> {
    fn train_epoch(&mut self, epoch: usize) -> Result<f64> {
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in batches(&order, self.batch_size) {
            let x = self.train.x.select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| self.train.y[i]).collect();
            self.net.zero_grad();
            let logits = self.net.forward_train(&x, &mut self.rng)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &y)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged { epoch, loss });
            }
            self.net.backward(&grad)?;
            self.optimizer.step(&mut self.net.params_mut())?;
            total += loss * batch.len() as f64;
        }
        Ok(total / self.train.len() as f64)
    }

    fn validate(&mut self) -> Result<Validation> {
        evaluate(self.net, self.val)
    }

    fn snapshot(&self) -> Vec<f64> {
        self.net.state()
    }

    fn restore(&mut self, state: &[f64]) -> Result<()> {
        self.net.load_state(state)
    }
}

/// Inference-mode loss and accuracy on a labeled set.
pub fn evaluate(net: &Network, data: &SequenceSet) -> Result<Validation> {
    let probs = net.predict_proba(&data.x)?;
    let n = net.n_classes();
    let mut loss = 0.0;
    for (row, &label) in probs.data().chunks_exact(n).zip(&data.y) {
        if label >= n {
            return Err(NnError::LabelOutOfRange { label, classes: n });
        }
        loss -= row[label].max(f64::MIN_POSITIVE).ln();
    }
    let pred = argmax_rows(&probs)?;
    let correct = pred.iter().zip(&data.y).filter(|(p, y)| p == y).count();
    Ok(Validation { loss: loss / data.len() as f64, accuracy: correct as f64 / data.len() as f64 })
}

/// Trains `net` on `train`, early-stopping on `val`, and leaves the best
/// epoch's parameters in place.
pub fn fit(net: &mut Network, train: &SequenceSet, val: &SequenceSet, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(NnError::EmptyData("training and early-stop splits must be non-empty".into()));
    }
    if train.len() < 2 {
        return Err(NnError::BatchTooSmall);
    }
    let mut trainer = NetworkTrainer {
        net,
        train,
        val,
        batch_size: cfg.batch_size,
        optimizer: Adam::new(cfg.adam),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    run_with_early_stopping(&mut trainer, cfg.max_epochs, cfg.patience)
}
