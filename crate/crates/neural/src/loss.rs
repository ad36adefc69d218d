use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Row-wise softmax of a `(batch, classes)` tensor.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let (_, n) = logits.dims2()?;
    let mut out = logits.data().to_vec();
    for row in out.chunks_exact_mut(n) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Tensor::new(logits.shape().to_vec(), out)
}

/// Mean sparse categorical cross-entropy over the batch, computed from logits.
/// Returns the loss and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (b, n) = logits.dims2()?;
    if labels.len() != b {
        return Err(NnError::Shape(format!("{} labels for batch of {b}", labels.len())));
    }
    if b == 0 {
        return Err(NnError::EmptyData("cross-entropy on empty batch".into()));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= n) {
        return Err(NnError::LabelOutOfRange { label, classes: n });
    }
    let mut grad = softmax(logits)?.into_data();
    let mut loss = 0.0;
    for (i, (row, logit_row)) in grad.chunks_exact_mut(n).zip(logits.data().chunks_exact(n)).enumerate() {
        let label = labels[i];
        // log-sum-exp in the stable form for the loss itself
        let max = logit_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logit_row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - logit_row[label];
        row[label] -= 1.0;
        row.iter_mut().for_each(|v| *v /= b as f64);
    }
    Ok((loss / b as f64, Tensor::new(vec![b, n], grad)?))
}
