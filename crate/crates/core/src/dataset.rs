//! Labeled datasets, min-connections filtering, stratified folds, and the
//! CSV formats for both feature sets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{sequence_features, stat_features, SequenceSample, STAT_FEATURE_COUNT, STAT_FEATURE_NAMES};
use crate::ingest::Flow;
use crate::meta::{split_meta, write_meta_line};

/// Sorted, de-duplicated class names; a class index is a position here.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelIndex(Vec<String>);

impl LabelIndex {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        LabelIndex(set.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.binary_search_by(|n| n.as_str().cmp(label)).ok()
    }

    pub fn name(&self, class: usize) -> &str {
        &self.0[class]
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset<T> {
    pub samples: Vec<T>,
    pub labels: Vec<usize>,
    pub label_index: LabelIndex,
    /// Source capture identifiers.
    pub provenance: Vec<String>,
}

pub type StatDataset = LabeledDataset<Vec<f64>>;
pub type SequenceDataset = LabeledDataset<SequenceSample>;

impl<T: Clone> LabeledDataset<T> {
    /// Builds a dataset from per-sample label strings.
    pub fn from_named(samples: Vec<T>, names: &[String], provenance: Vec<String>) -> Result<Self> {
        if samples.len() != names.len() {
            return Err(Error::Dimension { expected: samples.len(), got: names.len() });
        }
        let label_index = LabelIndex::from_labels(names.iter().cloned());
        let labels = names.iter().map(|n| label_index.index_of(n).expect("label present")).collect();
        Ok(LabeledDataset { samples, labels, label_index, provenance })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.label_index.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn label_names(&self) -> Vec<&str> {
        self.labels.iter().map(|&l| self.label_index.name(l)).collect()
    }

    /// Rows at `indices`, keeping the label index as is.
    pub fn subset(&self, indices: &[usize]) -> Self {
        LabeledDataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_index: self.label_index.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Drops every class with fewer than `threshold` samples and re-compacts
    /// the label index. Surviving samples keep their order.
    pub fn apply_min_connections(&self, threshold: usize) -> Result<Self> {
        if threshold == 0 {
            return Err(Error::Invalid("min-connections threshold must be at least 1".into()));
        }
        let counts = self.class_counts();
        let kept: Vec<usize> = (0..self.n_classes()).filter(|&c| counts[c] >= threshold).collect();
        if kept.is_empty() {
            return Err(Error::NoClassesLeft { threshold });
        }
        let label_index = LabelIndex(kept.iter().map(|&c| self.label_index.name(c).to_owned()).collect());
        let mut remap = vec![usize::MAX; self.n_classes()];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new;
        }
        let mut out = LabeledDataset {
            samples: Vec::new(),
            labels: Vec::new(),
            label_index,
            provenance: self.provenance.clone(),
        };
        for (s, &l) in self.samples.iter().zip(&self.labels) {
            if remap[l] != usize::MAX {
                out.samples.push(s.clone());
                out.labels.push(remap[l]);
            }
        }
        Ok(out)
    }
}

/// Fold assignment for every sample; serialized as JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }
}

fn by_class(labels: &[usize], indices: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); n_classes];
    for &i in indices {
        groups[labels[i]].push(i);
    }
    groups
}

/// Stratified k-fold assignment. Each class's samples are shuffled with a
/// seeded RNG and dealt round-robin; the dealing position carries over from
/// one class to the next so overall fold sizes also stay within one.
pub fn kfold_split(labels: &[usize], label_index: &LabelIndex, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Invalid(format!("k must be at least 2, got {k}")));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let groups = by_class(labels, &all, label_index.len());
    for (c, g) in groups.iter().enumerate() {
        if !g.is_empty() && g.len() < k {
            return Err(Error::ClassTooSmall { class: label_index.name(c).to_owned(), count: g.len(), k });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            assignments[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Splits `indices` into (fit, holdout) with about `fraction` of every class
/// held out; classes with a single sample stay entirely in the fit part.
pub fn stratified_holdout(
    labels: &[usize],
    indices: &[usize],
    n_classes: usize,
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fit = Vec::new();
    let mut holdout = Vec::new();
    for mut g in by_class(labels, indices, n_classes) {
        g.shuffle(&mut rng);
        let take = if g.len() < 2 { 0 } else { ((g.len() as f64 * fraction).round() as usize).clamp(1, g.len() - 1) };
        holdout.extend_from_slice(&g[..take]);
        fit.extend_from_slice(&g[take..]);
    }
    fit.sort_unstable();
    holdout.sort_unstable();
    (fit, holdout)
}

/// Statistical and sequence datasets for labeled flows, row-aligned.
/// Unlabeled flows are rejected.
pub fn build_datasets(
    flows: &[Flow],
    seq_len: usize,
    provenance: Vec<String>,
) -> Result<(StatDataset, SequenceDataset)> {
    let names = flows
        .iter()
        .enumerate()
        .map(|(i, f)| f.sni.clone().ok_or_else(|| Error::Invalid(format!("flow {i} has no label"))))
        .collect::<Result<Vec<_>>>()?;
    let stats: Vec<Vec<f64>> = flows.par_iter().map(|f| stat_features(f).0).collect();
    let seqs = flows.par_iter().map(|f| sequence_features(f, seq_len)).collect::<Result<Vec<_>>>()?;
    Ok((
        LabeledDataset::from_named(stats, &names, provenance.clone())?,
        LabeledDataset::from_named(seqs, &names, provenance)?,
    ))
}

// ---- CSV -------------------------------------------------------------------

fn file_meta(format: &str, provenance: &[String], extra: Option<&serde_json::Value>) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    m.insert("format".into(), format.into());
    m.insert("version".into(), 1.into());
    m.insert("provenance".into(), provenance.into());
    if let Some(extra) = extra {
        m.insert("run".into(), extra.clone());
    }
    serde_json::Value::Object(m)
}

fn read_provenance(meta: &Option<serde_json::Value>) -> Vec<String> {
    meta.as_ref()
        .and_then(|m| m.get("provenance"))
        .and_then(|p| serde_json::from_value(p.clone()).ok())
        .unwrap_or_default()
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::DatasetFile(format!("line {line}: bad number `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::DatasetFile(format!("line {line}: non-finite value")));
    }
    Ok(v)
}

/// Header: the 42 feature names, then `label`.
pub fn write_stat_csv<W: Write>(ds: &StatDataset, run: Option<&serde_json::Value>, mut out: W) -> Result<()> {
    write_meta_line(&mut out, &file_meta("sniforge-stats", &ds.provenance, run))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STAT_FEATURE_NAMES.iter().copied().chain(["label"]))?;
    for (row, name) in ds.samples.iter().zip(ds.label_names()) {
        w.write_record(row.iter().map(|v| v.to_string()).chain([name.to_owned()]))?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the dataset and the `run` entry of the metadata line, if any.
pub fn read_stat_csv<R: Read>(mut input: R) -> Result<(StatDataset, Option<serde_json::Value>)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (meta, body) = split_meta(&text)?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let expected: Vec<&str> = STAT_FEATURE_NAMES.iter().copied().chain(["label"]).collect();
    if header != expected {
        return Err(Error::DatasetFile("header is not the 42 feature names followed by `label`".into()));
    }
    let mut samples = Vec::new();
    let mut names = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i + 2 + usize::from(meta.is_some());
        let values = (0..STAT_FEATURE_COUNT).map(|j| parse_f64(&row[j], line)).collect::<Result<Vec<_>>>()?;
        samples.push(values);
        names.push(row[STAT_FEATURE_COUNT].to_owned());
    }
    let provenance = read_provenance(&meta);
    let run = meta.and_then(|m| m.get("run").cloned());
    Ok((LabeledDataset::from_named(samples, &names, provenance)?, run))
}

const SEQ_PREFIXES: [&str; 4] = ["pkt", "pay", "iat", "dir"];

/// Header: `label`, then `pkt_0..`, `pay_0..`, `iat_0..` and, with
/// `with_direction`, `dir_0..`.
pub fn write_seq_csv<W: Write>(
    ds: &SequenceDataset,
    with_direction: bool,
    run: Option<&serde_json::Value>,
    mut out: W,
) -> Result<()> {
    write_meta_line(&mut out, &file_meta("sniforge-sequences", &ds.provenance, run))?;
    let n = ds.samples.first().map_or(0, SequenceSample::len);
    let channels = if with_direction { 4 } else { 3 };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_owned()];
    for p in &SEQ_PREFIXES[..channels] {
        header.extend((0..n).map(|t| format!("{p}_{t}")));
    }
    w.write_record(&header)?;
    for (s, name) in ds.samples.iter().zip(ds.label_names()) {
        if s.len() != n {
            return Err(Error::Dimension { expected: n, got: s.len() });
        }
        let mut row = vec![name.to_owned()];
        row.extend(s.packet_size.iter().map(f64::to_string));
        row.extend(s.payload_size.iter().map(f64::to_string));
        row.extend(s.iat_log.iter().map(f64::to_string));
        if with_direction {
            row.extend(s.direction.iter().map(i8::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the dataset, whether a direction channel was stored, and the
/// `run` metadata entry. Without stored directions the channel is all zeros.
pub fn read_seq_csv<R: Read>(mut input: R) -> Result<(SequenceDataset, bool, Option<serde_json::Value>)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (meta, body) = split_meta(&text)?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.first().map(String::as_str) != Some("label") {
        return Err(Error::DatasetFile("first column must be `label`".into()));
    }
    let cols = header.len() - 1;
    let (channels, n) = match (cols.is_multiple_of(4) && header.iter().any(|h| h == "dir_0"), cols % 3) {
        (true, _) => (4, cols / 4),
        (false, 0) => (3, cols / 3),
        _ => return Err(Error::DatasetFile(format!("{cols} value columns fit no channel layout"))),
    };
    if n == 0 {
        return Err(Error::DatasetFile("no sequence columns".into()));
    }
    for (c, p) in SEQ_PREFIXES[..channels].iter().enumerate() {
        for t in 0..n {
            if header[1 + c * n + t] != format!("{p}_{t}") {
                return Err(Error::DatasetFile(format!("expected column {p}_{t}, found `{}`", header[1 + c * n + t])));
            }
        }
    }
    let mut samples = Vec::new();
    let mut names = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i + 2 + usize::from(meta.is_some());
        let chan = |c: usize| (0..n).map(|t| parse_f64(&row[1 + c * n + t], line)).collect::<Result<Vec<_>>>();
        let direction = if channels == 4 {
            chan(3)?
                .into_iter()
                .map(|d| match d {
                    1.0 => Ok(1),
                    -1.0 => Ok(-1),
                    0.0 => Ok(0),
                    _ => Err(Error::DatasetFile(format!("line {line}: direction {d} not in {{-1, 0, 1}}"))),
                })
                .collect::<Result<Vec<i8>>>()?
        } else {
            vec![0; n]
        };
        samples.push(SequenceSample { packet_size: chan(0)?, payload_size: chan(1)?, iat_log: chan(2)?, direction });
        names.push(row[0].to_owned());
    }
    let provenance = read_provenance(&meta);
    let run = meta.and_then(|m| m.get("run").cloned());
    Ok((LabeledDataset::from_named(samples, &names, provenance)?, channels == 4, run))
}

/// Per-class sample counts keyed by label, for logs and reports.
pub fn class_histogram<T: Clone>(ds: &LabeledDataset<T>) -> BTreeMap<String, usize> {
    ds.label_index.names().iter().cloned().zip(ds.class_counts()).collect()
}
