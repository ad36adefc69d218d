//! CART decision trees (Gini) and a bootstrap random forest.
//!
//! Split search is exact: among candidate (feature, threshold) pairs the
//! one with the lowest weighted Gini impurity wins, compared as rationals so
//! ties are real ties. Ties go to the lowest feature index, then the lowest
//! threshold. A sample goes left when `x[feature] <= threshold`.

use std::cmp::Ordering;
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::ProbMatrix;
use crate::error::{Error, Result};

/// Floor applied before taking logs of forest probabilities.
pub const LOG_PROBA_FLOOR: f64 = 1e-12;

const FORMAT: &str = "sniforge-forest";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Training-sample counts per class, bootstrap multiplicity included.
    Leaf {
        counts: Vec<u64>,
    },
}

/// Nodes in a flat array; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub n_classes: usize,
    pub nodes: Vec<Node>,
}

/// Weighted class counts of a candidate side, with sum of squares kept for
/// the exact score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Score {
    /// (S_L·n_R + S_R·n_L) where S = Σ count², n = side weight.
    num: u128,
    /// n_L·n_R
    den: u128,
}

impl Score {
    /// Larger is better: weighted Gini = 1 − (num/den)/n.
    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: Score,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    if mid < b {
        mid
    } else {
        a
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn counts(&self, items: &[(usize, u64)]) -> Vec<u64> {
        let mut c = vec![0u64; self.n_classes];
        for &(i, w) in items {
            c[self.y[i]] += w;
        }
        c
    }

    /// Best threshold on one feature, or `None` if the feature is constant
    /// on this node.
    fn best_on_feature(&self, items: &mut [(usize, u64)], feature: usize, total: &[u64]) -> Option<Candidate> {
        items.sort_by(|a, b| self.x[a.0][feature].total_cmp(&self.x[b.0][feature]));
        let n: u64 = total.iter().sum();
        let mut left = vec![0u64; self.n_classes];
        let mut n_left = 0u64;
        let mut best: Option<Candidate> = None;
        for j in 0..items.len() - 1 {
            let (i, w) = items[j];
            left[self.y[i]] += w;
            n_left += w;
            let a = self.x[i][feature];
            let b = self.x[items[j + 1].0][feature];
            if a == b {
                continue;
            }
            let n_right = n - n_left;
            let s_left: u128 = left.iter().map(|&c| u128::from(c) * u128::from(c)).sum();
            let s_right: u128 = left.iter().zip(total).map(|(&l, &t)| u128::from(t - l) * u128::from(t - l)).sum();
            let score = Score {
                num: s_left * u128::from(n_right) + s_right * u128::from(n_left),
                den: u128::from(n_left) * u128::from(n_right),
            };
            // thresholds increase along the scan, so only strict gains replace
            if best.as_ref().is_none_or(|c| score.cmp(&c.score) == Ordering::Greater) {
                best = Some(Candidate { feature, threshold: midpoint(a, b), score });
            }
        }
        best
    }

    fn grow(&mut self, items: &mut [(usize, u64)], rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(items);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        if counts.iter().filter(|&&c| c > 0).count() <= 1 {
            return slot;
        }

        let d = self.x[0].len();
        let order = sample(rng, d, d).into_vec();
        let mut best: Option<Candidate> = None;
        let mut usable = 0;
        for &feature in &order {
            // keep drawing past max_features while every candidate so far was constant
            if usable >= self.max_features {
                break;
            }
            let Some(c) = self.best_on_feature(items, feature, &counts) else { continue };
            usable += 1;
            let better = match &best {
                None => true,
                Some(b) => match c.score.cmp(&b.score) {
                    Ordering::Greater => true,
                    Ordering::Equal => c.feature < b.feature,
                    Ordering::Less => false,
                },
            };
            if better {
                best = Some(c);
            }
        }
        let Some(best) = best else { return slot };

        let f = best.feature;
        items.sort_by(|a, b| self.x[a.0][f].total_cmp(&self.x[b.0][f]).then(a.0.cmp(&b.0)));
        let split = items.partition_point(|&(i, _)| self.x[i][f] <= best.threshold);
        let (l, r) = items.split_at_mut(split);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[slot] = Node::Split { feature: f, threshold: best.threshold, left, right };
        slot
    }
}

fn check_rows(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Empty("no training samples".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::Invalid("samples have no features".into()));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::Dimension { expected: d, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite feature value".into()));
        }
    }
    if let Some(&l) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Invalid(format!("label {l} >= class count {n_classes}")));
    }
    Ok(d)
}

/// Grows an unpruned CART tree.
///
/// `sample_weights` gives each row's multiplicity (bootstrap counts; zero
/// excludes the row). At every node, candidate features are drawn without
/// replacement until `max_features` non-constant ones have been scored. A
/// node becomes a leaf when it is pure or all its rows share identical
/// features.
pub fn train_tree(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    sample_weights: &[u64],
    max_features: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DecisionTree> {
    let d = check_rows(x, y, n_classes)?;
    if sample_weights.len() != x.len() {
        return Err(Error::Dimension { expected: x.len(), got: sample_weights.len() });
    }
    if max_features == 0 || max_features > d {
        return Err(Error::Invalid(format!("max_features {max_features} not in 1..={d}")));
    }
    let mut items: Vec<(usize, u64)> =
        sample_weights.iter().enumerate().filter(|(_, &w)| w > 0).map(|(i, &w)| (i, w)).collect();
    if items.is_empty() {
        return Err(Error::Empty("all sample weights are zero".into()));
    }
    let mut g = Grower { x, y, n_classes, max_features, nodes: Vec::new() };
    g.grow(&mut items, rng);
    Ok(DecisionTree { n_features: d, n_classes, nodes: g.nodes })
}

impl DecisionTree {
    pub fn leaf_for(&self, x: &[f64]) -> &[u64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Class frequencies of the leaf reached by `x`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension { expected: self.n_features, got: x.len() });
        }
        let counts = self.leaf_for(x);
        let total: u64 = counts.iter().sum();
        Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` means ⌊√d⌋ (at least 1).
    pub max_features: Option<usize>,
    /// Disabling gives every tree the full training set once.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, max_features: None, bootstrap: true, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub n_classes: usize,
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
}

pub fn default_max_features(d: usize) -> usize {
    ((d as f64).sqrt().floor() as usize).max(1)
}

/// RNG for tree `index`: the seed selects the key, the index the stream, so
/// every tree's draws are independent of scheduling.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Trains `n_trees` trees in parallel on the current rayon pool.
pub fn train_forest(x: &[Vec<f64>], y: &[usize], n_classes: usize, config: &ForestConfig) -> Result<RandomForest> {
    let d = check_rows(x, y, n_classes)?;
    if config.n_trees == 0 {
        return Err(Error::Invalid("n_trees must be at least 1".into()));
    }
    let max_features = config.max_features.unwrap_or_else(|| default_max_features(d));
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(config.seed, t);
            let mut weights = vec![0u64; x.len()];
            if config.bootstrap {
                for _ in 0..x.len() {
                    weights[rng.random_range(0..x.len())] += 1;
                }
            } else {
                weights.fill(1);
            }
            train_tree(x, y, n_classes, &weights, max_features, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForest { n_features: d, n_classes, config: config.clone(), trees })
}

impl RandomForest {
    /// Mean over trees of leaf class frequencies.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension { expected: self.n_features, got: x.len() });
        }
        let mut out = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let counts = tree.leaf_for(x);
            let total: u64 = counts.iter().sum();
            for (o, &c) in out.iter_mut().zip(counts) {
                *o += c as f64 / total as f64;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        Ok(out)
    }

    pub fn predict_proba_matrix(&self, rows: &[Vec<f64>]) -> Result<ProbMatrix> {
        let probs = rows.iter().map(|r| self.predict_proba(r)).collect::<Result<Vec<_>>>()?;
        ProbMatrix::from_rows(&probs)
    }

    /// `ln(max(p, LOG_PROBA_FLOOR))` per entry.
    pub fn predict_log_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_proba(x)?.into_iter().map(|p| p.max(LOG_PROBA_FLOOR).ln()).collect())
    }

    /// JSON with a format tag and version.
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Artifact<'a> {
            format: &'a str,
            version: u32,
            forest: &'a RandomForest,
        }
        serde_json::to_writer(out, &Artifact { format: FORMAT, version: VERSION, forest: self })?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Artifact {
            format: String,
            version: u32,
            forest: RandomForest,
        }
        let a: Artifact = serde_json::from_reader(input)?;
        if a.format != FORMAT || a.version != VERSION {
            return Err(Error::Invalid(format!("not a {FORMAT} v{VERSION} artifact: {} v{}", a.format, a.version)));
        }
        Ok(a.forest)
    }
}
