//! Accuracy, macro precision/recall/F1, and per-class accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::LabelIndex;
use crate::error::{Error, Result};

fn check(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), got: pred.len() });
    }
    if truth.is_empty() {
        return Err(Error::Empty("no predictions".into()));
    }
    Ok(())
}

/// Correct predictions over all predictions.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred, truth)?;
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// `m[truth][pred]` counts.
pub fn confusion_matrix(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    check(pred, truth)?;
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::Invalid(format!("label {} >= class count {n_classes}", p.max(t))));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted means over all `n_classes` of per-class precision, recall
/// and F1. A zero denominator makes that class's value 0.
pub fn macro_prf(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<MacroScores> {
    let m = confusion_matrix(pred, truth, n_classes)?;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for c in 0..n_classes {
        let tp = m[c][c];
        let predicted: usize = (0..n_classes).map(|t| m[t][c]).sum();
        let actual: usize = m[c].iter().sum();
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        p_sum += p;
        r_sum += r;
        f_sum += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    let n = n_classes as f64;
    Ok(MacroScores { precision: p_sum / n, recall: r_sum / n, f1: f_sum / n })
}

/// Accuracy over the samples of each true class; classes absent from
/// `truth` are omitted.
pub fn per_sni_accuracy(pred: &[usize], truth: &[usize], labels: &LabelIndex) -> Result<BTreeMap<String, f64>> {
    check(pred, truth)?;
    let mut hits = vec![0usize; labels.len()];
    let mut support = vec![0usize; labels.len()];
    for (&p, &t) in pred.iter().zip(truth) {
        if t >= labels.len() {
            return Err(Error::Invalid(format!("label {t} >= class count {}", labels.len())));
        }
        support[t] += 1;
        hits[t] += usize::from(p == t);
    }
    Ok((0..labels.len())
        .filter(|&c| support[c] > 0)
        .map(|c| (labels.name(c).to_owned(), hits[c] as f64 / support[c] as f64))
        .collect())
}
