//! Probability matrices and the two ensembles: the unweighted softmax
//! average over the sequence models, and the forest-weighted combination.

use crate::error::{Error, Result};

/// Row-major `rows × n_classes` matrix of classifier outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMatrix {
    n_classes: usize,
    data: Vec<f64>,
}

/// Relative weights of (forest, packet, payload, inter-arrival) in the
/// combined ensemble: ½, ⅙, ⅙, ⅙ scaled by 6 so ties stay exact.
pub const COMBINED_WEIGHTS: [f64; 4] = [3.0, 1.0, 1.0, 1.0];

impl ProbMatrix {
    pub fn new(n_classes: usize, data: Vec<f64>) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::Shape("probability matrix with zero classes".into()));
        }
        if !data.len().is_multiple_of(n_classes) {
            return Err(Error::Shape(format!("{} values do not fill rows of {n_classes}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite probability".into()));
        }
        Ok(ProbMatrix { n_classes, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_classes = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != n_classes) {
            return Err(Error::Dimension { expected: n_classes, got: r.len() });
        }
        Self::new(n_classes.max(1), rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_classes)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&self, factor: f64) -> ProbMatrix {
        ProbMatrix { n_classes: self.n_classes, data: self.data.iter().map(|v| v * factor).collect() }
    }

    /// Every row non-negative and summing to 1 within `tol`.
    pub fn is_simplex(&self, tol: f64) -> bool {
        self.rows().all(|r| r.iter().all(|&v| v >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() <= tol)
    }

    /// Per-row [`argmax`].
    pub fn argmax(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> ProbMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_classes);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        ProbMatrix { n_classes: self.n_classes, data }
    }
}

/// Scores within this fraction of the row maximum count as tied, so that
/// ties which are exact in real arithmetic survive floating-point rounding.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the largest entry; the lowest index among (near-)ties wins.
pub fn argmax(row: &[f64]) -> usize {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = max - TIE_TOLERANCE * max.abs();
    row.iter().position(|&v| v >= floor).unwrap_or(0)
}

fn same_shape(mats: &[&ProbMatrix]) -> Result<()> {
    let first = mats.first().ok_or_else(|| Error::Empty("no matrices to combine".into()))?;
    for m in &mats[1..] {
        if m.n_classes != first.n_classes || m.data.len() != first.data.len() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                first.n_rows(),
                first.n_classes,
                m.n_rows(),
                m.n_classes
            )));
        }
    }
    Ok(())
}

/// `Σ w_i · M_i` element-wise, summed in argument order.
pub fn weighted_sum(mats: &[&ProbMatrix], weights: &[f64]) -> Result<ProbMatrix> {
    same_shape(mats)?;
    if weights.len() != mats.len() {
        return Err(Error::Dimension { expected: mats.len(), got: weights.len() });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Invalid("ensemble weights must be finite and non-negative".into()));
    }
    let mut data = vec![0.0; mats[0].data.len()];
    for (m, &w) in mats.iter().zip(weights) {
        for (d, v) in data.iter_mut().zip(&m.data) {
            *d += w * v;
        }
    }
    Ok(ProbMatrix { n_classes: mats[0].n_classes, data })
}

/// Unweighted element-wise mean.
pub fn average_softmax(mats: &[&ProbMatrix]) -> Result<ProbMatrix> {
    same_shape(mats)?;
    let sum = weighted_sum(mats, &vec![1.0; mats.len()])?;
    Ok(sum.scale(1.0 / mats.len() as f64))
}

/// Argmax of `Σ w_i · M_i`, ties to the lowest class index.
pub fn weighted_argmax(mats: &[&ProbMatrix], weights: &[f64]) -> Result<Vec<usize>> {
    Ok(weighted_sum(mats, weights)?.argmax())
}

/// `argmax ½·rf + ⅙·d1 + ⅙·d2 + ⅙·d3`, evaluated with [`COMBINED_WEIGHTS`].
pub fn combined_rf_dl(rf: &ProbMatrix, d1: &ProbMatrix, d2: &ProbMatrix, d3: &ProbMatrix) -> Result<Vec<usize>> {
    weighted_argmax(&[rf, d1, d2, d3], &COMBINED_WEIGHTS)
}
