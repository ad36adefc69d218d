//! The cross-validation experiment: for every min-connections threshold,
//! filter the corpus, split it into stratified folds, train the forest and
//! the sequence models on each training portion, score individual models and
//! both ensembles on the held-out fold, and aggregate the metrics.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sniforge_neural::{
    build_baseline_rnn, build_cnn_rnn, fit, CnnRnnWidths, Network, SequenceSet, Tensor, TrainConfig,
};
use tracing::info;

use crate::dataset::{build_datasets, kfold_split, stratified_holdout, LabelIndex, SequenceDataset, StatDataset};
use crate::ensemble::{average_softmax, weighted_argmax, ProbMatrix, COMBINED_WEIGHTS};
use crate::error::{Error, Result};
use crate::features::Channel;
use crate::forest::{train_forest, ForestConfig, LOG_PROBA_FLOOR};
use crate::ingest::Flow;
use crate::metrics::{accuracy, macro_prf, per_sni_accuracy};

pub const REPORT_FORMAT: &str = "sniforge-eval-report";
pub const REPORT_VERSION: u32 = 1;

/// Which base classifiers to train. The ensembles are scored whenever their
/// members are present: `dl-ensemble` needs the three sequence models,
/// `combined` additionally the forest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierSet {
    pub rf: bool,
    /// The three CNN-GRU models on packet size, payload size and log
    /// inter-arrival time (the last with dropout).
    pub sequence: bool,
    /// Two-layer GRU on all three channels.
    pub baseline_rnn: bool,
}

impl ClassifierSet {
    pub const ALL: ClassifierSet = ClassifierSet { rf: true, sequence: true, baseline_rnn: false };
    pub const RF_ONLY: ClassifierSet = ClassifierSet { rf: true, sequence: false, baseline_rnn: false };

    /// `all`, `rf-only`, `dl-only`, or a comma list of `rf`, `cnn-rnn`,
    /// `baseline-rnn`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" => return Ok(Self::ALL),
            "rf-only" => return Ok(Self::RF_ONLY),
            "dl-only" => return Ok(ClassifierSet { rf: false, sequence: true, baseline_rnn: false }),
            _ => {}
        }
        let mut set = ClassifierSet { rf: false, sequence: false, baseline_rnn: false };
        for part in s.split(',').map(str::trim) {
            match part {
                "rf" => set.rf = true,
                "cnn-rnn" => set.sequence = true,
                "baseline-rnn" => set.baseline_rnn = true,
                other => return Err(Error::Invalid(format!("unknown classifier `{other}`"))),
            }
        }
        if !(set.rf || set.sequence || set.baseline_rnn) {
            return Err(Error::Invalid("no classifiers selected".into()));
        }
        Ok(set)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub thresholds: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub classifiers: ClassifierSet,
    /// Also train sequence models with the direction channel appended.
    pub direction: bool,
    pub n_trees: usize,
    pub widths: CnnRnnWidths,
    pub baseline_hidden: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    /// Share of each class in a training portion held out for early stopping.
    pub holdout_fraction: f64,
    /// Weights of (forest, packet, payload, inter-arrival) in `combined`.
    pub weights: [f64; 4],
    /// Feed the forest's log-probabilities into `combined`.
    pub rf_log_proba: bool,
    /// Record wall-clock timings (makes reports differ between runs).
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            thresholds: vec![100],
            k: 10,
            seed: 42,
            classifiers: ClassifierSet::ALL,
            direction: false,
            n_trees: 100,
            widths: CnnRnnWidths::FULL,
            baseline_hidden: sniforge_neural::spec::BASELINE_HIDDEN,
            batch_size: 64,
            max_epochs: 100,
            patience: 5,
            learning_rate: 1e-3,
            holdout_fraction: 0.1,
            weights: COMBINED_WEIGHTS,
            rf_log_proba: false,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::Invalid("no thresholds".into()));
        }
        if self.thresholds.contains(&0) {
            return Err(Error::Invalid("thresholds must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::Invalid("k must be at least 2".into()));
        }
        if self.n_trees == 0 {
            return Err(Error::Invalid("n_trees must be at least 1".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Invalid("holdout_fraction must be in (0, 1)".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Invalid("weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSummary {
    pub fold: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub best_val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierReport {
    pub name: String,
    /// Metrics over the concatenated test folds (every sample once).
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_sni_accuracy: BTreeMap<String, f64>,
    pub folds: Vec<FoldMetrics>,
    /// Early-stopping record per fold for neural models.
    pub training: Option<Vec<TrainingSummary>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    Ok,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdReport {
    pub min_connections: usize,
    pub status: ThresholdStatus,
    pub reason: Option<String>,
    pub n_classes: usize,
    pub n_samples: usize,
    pub labels: Vec<String>,
    pub fold_seed: u64,
    pub classifiers: Vec<ClassifierReport>,
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub seed: u64,
    /// The configuration that produced this report, including provenance.
    pub run_config: serde_json::Value,
    pub thresholds: Vec<ThresholdReport>,
    pub total_seconds: Option<f64>,
}

/// SplitMix64 over the parts: independent, reproducible sub-seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

fn tag(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ModelKind {
    CnnRnn { dropout: bool },
    Baseline,
}

struct SequenceModel {
    name: String,
    channels: Vec<Channel>,
    kind: ModelKind,
}

fn sequence_models(cfg: &ExperimentConfig, has_direction: bool) -> Vec<SequenceModel> {
    let mut out = Vec::new();
    let variants: &[bool] = if cfg.direction && has_direction { &[false, true] } else { &[false] };
    for &dir in variants {
        let suffix = if dir { "+dir" } else { "" };
        let with = |c: Channel| if dir { vec![c, Channel::Direction] } else { vec![c] };
        if cfg.classifiers.sequence {
            out.push(SequenceModel {
                name: format!("packet{suffix}"),
                channels: with(Channel::PacketSize),
                kind: ModelKind::CnnRnn { dropout: false },
            });
            out.push(SequenceModel {
                name: format!("payload{suffix}"),
                channels: with(Channel::PayloadSize),
                kind: ModelKind::CnnRnn { dropout: false },
            });
            out.push(SequenceModel {
                name: format!("iat{suffix}"),
                channels: with(Channel::IatLog),
                kind: ModelKind::CnnRnn { dropout: true },
            });
        }
        if cfg.classifiers.baseline_rnn {
            let mut channels = vec![Channel::PacketSize, Channel::PayloadSize, Channel::IatLog];
            if dir {
                channels.push(Channel::Direction);
            }
            out.push(SequenceModel { name: format!("baseline-rnn{suffix}"), channels, kind: ModelKind::Baseline });
        }
    }
    out
}

/// `(rows, seq_len, channels)` tensor of the selected rows, time-major.
pub fn sequence_tensor(ds: &SequenceDataset, rows: &[usize], channels: &[Channel]) -> Result<Tensor> {
    let n = ds.samples.first().map_or(0, |s| s.len());
    let mut data = Vec::with_capacity(rows.len() * n * channels.len());
    for &r in rows {
        data.extend(ds.samples[r].interleave(channels));
    }
    Ok(Tensor::new(vec![rows.len(), n, channels.len()], data)?)
}

struct FoldOutput {
    test: Vec<usize>,
    probs: BTreeMap<String, ProbMatrix>,
    training: BTreeMap<String, TrainingSummary>,
}

struct FoldContext<'a> {
    stats: &'a StatDataset,
    seqs: &'a SequenceDataset,
    cfg: &'a ExperimentConfig,
    models: &'a [SequenceModel],
    threshold: usize,
}

fn run_fold(ctx: &FoldContext<'_>, fold: usize, train: Vec<usize>, test: Vec<usize>) -> Result<FoldOutput> {
    let cfg = ctx.cfg;
    let n_classes = ctx.stats.n_classes();
    let labels = &ctx.stats.labels;
    let seed_for = |name: &str| derive_seed(cfg.seed, &[ctx.threshold as u64, fold as u64, tag(name)]);
    let mut probs = BTreeMap::new();
    let mut training = BTreeMap::new();

    if cfg.classifiers.rf {
        let x: Vec<Vec<f64>> = train.iter().map(|&i| ctx.stats.samples[i].clone()).collect();
        let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let forest_cfg = ForestConfig { n_trees: cfg.n_trees, seed: seed_for("rf"), ..Default::default() };
        let forest = train_forest(&x, &y, n_classes, &forest_cfg)?;
        let test_x: Vec<Vec<f64>> = test.iter().map(|&i| ctx.stats.samples[i].clone()).collect();
        probs.insert("rf".to_owned(), forest.predict_proba_matrix(&test_x)?);
    }

    if !ctx.models.is_empty() {
        let (fit_rows, hold_rows) =
            stratified_holdout(labels, &train, n_classes, cfg.holdout_fraction, seed_for("holdout"));
        let ys = |rows: &[usize]| rows.iter().map(|&i| labels[i]).collect::<Vec<_>>();
        for m in ctx.models {
            let seq_len = ctx.seqs.samples.first().map_or(0, |s| s.len());
            let spec = match m.kind {
                ModelKind::CnnRnn { dropout } => {
                    build_cnn_rnn(n_classes, seq_len, m.channels.len(), &cfg.widths, dropout)?
                }
                ModelKind::Baseline => build_baseline_rnn(n_classes, seq_len, m.channels.len(), cfg.baseline_hidden)?,
            };
            let mut net = Network::new(spec, seed_for(&format!("{}-init", m.name)))?;
            let fit_set = SequenceSet::new(sequence_tensor(ctx.seqs, &fit_rows, &m.channels)?, ys(&fit_rows))?;
            let hold_set = SequenceSet::new(sequence_tensor(ctx.seqs, &hold_rows, &m.channels)?, ys(&hold_rows))?;
            let train_cfg = TrainConfig {
                batch_size: cfg.batch_size,
                adam: sniforge_neural::AdamConfig { learning_rate: cfg.learning_rate, ..Default::default() },
                max_epochs: cfg.max_epochs,
                patience: cfg.patience,
                seed: seed_for(&format!("{}-train", m.name)),
            };
            let history = fit(&mut net, &fit_set, &hold_set, &train_cfg)?;
            info!(
                threshold = ctx.threshold,
                fold,
                model = %m.name,
                epochs = history.epochs_run,
                best_epoch = history.best_epoch,
                "trained"
            );
            training.insert(
                m.name.clone(),
                TrainingSummary {
                    fold,
                    epochs_run: history.epochs_run,
                    best_epoch: history.best_epoch,
                    stopped_early: history.stopped_early,
                    best_val_loss: history.val_loss[history.best_epoch - 1],
                },
            );
            let p = net.predict_proba(&sequence_tensor(ctx.seqs, &test, &m.channels)?)?;
            probs.insert(m.name.clone(), ProbMatrix::new(n_classes, p.into_data())?);
        }
    }
    Ok(FoldOutput { test, probs, training })
}

/// Final predictions of every scored classifier (base models and ensembles)
/// for one fold's test rows.
fn fold_predictions(out: &FoldOutput, cfg: &ExperimentConfig) -> Result<BTreeMap<String, Vec<usize>>> {
    let mut preds: BTreeMap<String, Vec<usize>> = out.probs.iter().map(|(k, v)| (k.clone(), v.argmax())).collect();
    for suffix in ["", "+dir"] {
        let get = |n: &str| out.probs.get(&format!("{n}{suffix}"));
        let (Some(pkt), Some(pay), Some(iat)) = (get("packet"), get("payload"), get("iat")) else { continue };
        preds.insert(format!("dl-ensemble{suffix}"), average_softmax(&[pkt, pay, iat])?.argmax());
        if let Some(rf) = out.probs.get("rf") {
            let rf_term = if cfg.rf_log_proba {
                let logs = rf.data().iter().map(|p| p.max(LOG_PROBA_FLOOR).ln()).collect();
                ProbMatrix::new(rf.n_classes(), logs)?
            } else {
                rf.clone()
            };
            preds.insert(format!("combined{suffix}"), weighted_argmax(&[&rf_term, pkt, pay, iat], &cfg.weights)?);
        }
    }
    Ok(preds)
}

fn classifier_order(name: &str) -> (usize, String) {
    let base = name.trim_end_matches("+dir");
    let rank = ["rf", "packet", "payload", "iat", "baseline-rnn", "dl-ensemble", "combined"]
        .iter()
        .position(|n| *n == base)
        .unwrap_or(usize::MAX);
    (rank, name.to_owned())
}

fn skipped(threshold: usize, fold_seed: u64, reason: String) -> ThresholdReport {
    info!(threshold, %reason, "threshold skipped");
    ThresholdReport {
        min_connections: threshold,
        status: ThresholdStatus::Skipped,
        reason: Some(reason),
        n_classes: 0,
        n_samples: 0,
        labels: Vec::new(),
        fold_seed,
        classifiers: Vec::new(),
        seconds: None,
    }
}

fn run_threshold(
    stats: &StatDataset,
    seqs: &SequenceDataset,
    has_direction: bool,
    cfg: &ExperimentConfig,
    threshold: usize,
) -> Result<ThresholdReport> {
    let started = Instant::now();
    let fold_seed = derive_seed(cfg.seed, &[threshold as u64, tag("folds")]);
    let stats = match stats.apply_min_connections(threshold) {
        Ok(s) => s,
        Err(e @ Error::NoClassesLeft { .. }) => return Ok(skipped(threshold, fold_seed, e.to_string())),
        Err(e) => return Err(e),
    };
    let seqs = seqs.apply_min_connections(threshold)?;
    let plan = match kfold_split(&stats.labels, &stats.label_index, cfg.k, fold_seed) {
        Ok(p) => p,
        Err(e @ Error::ClassTooSmall { .. }) => return Ok(skipped(threshold, fold_seed, e.to_string())),
        Err(e) => return Err(e),
    };
    info!(threshold, classes = stats.n_classes(), samples = stats.len(), "threshold start");

    let models = sequence_models(cfg, has_direction);
    let ctx = FoldContext { stats: &stats, seqs: &seqs, cfg, models: &models, threshold };
    let outputs = (0..cfg.k)
        .into_par_iter()
        .map(|f| run_fold(&ctx, f, plan.train_indices(f), plan.test_indices(f)))
        .collect::<Result<Vec<_>>>()?;

    let mut all_truth = Vec::new();
    let mut all_pred: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut folds: BTreeMap<String, Vec<FoldMetrics>> = BTreeMap::new();
    let mut training: BTreeMap<String, Vec<TrainingSummary>> = BTreeMap::new();
    for (f, out) in outputs.iter().enumerate() {
        let truth: Vec<usize> = out.test.iter().map(|&i| stats.labels[i]).collect();
        for (name, pred) in fold_predictions(out, cfg)? {
            let m = macro_prf(&pred, &truth, stats.n_classes())?;
            folds.entry(name.clone()).or_default().push(FoldMetrics {
                fold: f,
                n_test: truth.len(),
                accuracy: accuracy(&pred, &truth)?,
                macro_precision: m.precision,
                macro_recall: m.recall,
                macro_f1: m.f1,
            });
            all_pred.entry(name).or_default().extend(pred);
        }
        for (name, t) in &out.training {
            training.entry(name.clone()).or_default().push(t.clone());
        }
        all_truth.extend(truth);
    }

    let mut names: Vec<String> = all_pred.keys().cloned().collect();
    names.sort_by_key(|n| classifier_order(n));
    let mut classifiers = Vec::new();
    for name in names {
        let pred = &all_pred[&name];
        let m = macro_prf(pred, &all_truth, stats.n_classes())?;
        classifiers.push(ClassifierReport {
            accuracy: accuracy(pred, &all_truth)?,
            macro_precision: m.precision,
            macro_recall: m.recall,
            macro_f1: m.f1,
            per_sni_accuracy: per_sni_accuracy(pred, &all_truth, &stats.label_index)?,
            folds: folds.remove(&name).unwrap_or_default(),
            training: training.remove(&name),
            name,
        });
    }
    for c in &classifiers {
        info!(threshold, classifier = %c.name, accuracy = c.accuracy, "scored");
    }
    Ok(ThresholdReport {
        min_connections: threshold,
        status: ThresholdStatus::Ok,
        reason: None,
        n_classes: stats.n_classes(),
        n_samples: stats.len(),
        labels: stats.label_index.names().to_vec(),
        fold_seed,
        classifiers,
        seconds: cfg.record_timing.then(|| started.elapsed().as_secs_f64()),
    })
}

fn check_aligned(stats: &StatDataset, seqs: &SequenceDataset) -> Result<()> {
    if stats.len() != seqs.len() {
        return Err(Error::Invalid(format!(
            "statistical dataset has {} rows, sequence dataset {}",
            stats.len(),
            seqs.len()
        )));
    }
    if let Some(i) =
        (0..stats.len()).find(|&i| stats.label_index.name(stats.labels[i]) != seqs.label_index.name(seqs.labels[i]))
    {
        return Err(Error::Invalid(format!("datasets disagree on the label of row {i}")));
    }
    Ok(())
}

/// Runs the whole sweep over row-aligned datasets. Folds run in parallel
/// on the current rayon pool; the report does not depend on the pool size.
///
/// `run_config` is embedded in the report verbatim.
pub fn run_experiment(
    stats: &StatDataset,
    seqs: &SequenceDataset,
    has_direction: bool,
    cfg: &ExperimentConfig,
    run_config: serde_json::Value,
) -> Result<EvalReport> {
    cfg.validate()?;
    check_aligned(stats, seqs)?;
    if stats.is_empty() {
        return Err(Error::Empty("no samples to evaluate".into()));
    }
    let started = Instant::now();
    let thresholds = cfg
        .thresholds
        .iter()
        .map(|&t| run_threshold(stats, seqs, has_direction, cfg, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        format: REPORT_FORMAT.to_owned(),
        version: REPORT_VERSION,
        k: cfg.k,
        seed: cfg.seed,
        run_config,
        thresholds,
        total_seconds: cfg.record_timing.then(|| started.elapsed().as_secs_f64()),
    })
}

/// Builds both datasets from labeled flows and runs the sweep.
pub fn run_experiment_on_flows(
    flows: &[Flow],
    seq_len: usize,
    cfg: &ExperimentConfig,
    run_config: serde_json::Value,
) -> Result<EvalReport> {
    let (stats, seqs) = build_datasets(flows, seq_len, Vec::new())?;
    run_experiment(&stats, &seqs, true, cfg, run_config)
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} = {v} outside [0, 1]")))
    }
}

/// Parses a report and checks its structural invariants: known format and
/// version, metrics in [0, 1], `k` fold rows per classifier whose test sizes
/// add up to the sample count, and per-SNI keys drawn from the labels.
pub fn validate_report(json: &str) -> Result<EvalReport> {
    let report: EvalReport = serde_json::from_str(json)?;
    if report.format != REPORT_FORMAT || report.version != REPORT_VERSION {
        return Err(Error::Invalid(format!("unsupported report {} v{}", report.format, report.version)));
    }
    for t in &report.thresholds {
        if t.status == ThresholdStatus::Skipped {
            if t.reason.is_none() {
                return Err(Error::Invalid(format!("threshold {} skipped without a reason", t.min_connections)));
            }
            continue;
        }
        if t.labels.len() != t.n_classes {
            return Err(Error::Invalid(format!("threshold {}: label count mismatch", t.min_connections)));
        }
        for c in &t.classifiers {
            for (n, v) in [
                ("accuracy", c.accuracy),
                ("macro_precision", c.macro_precision),
                ("macro_recall", c.macro_recall),
                ("macro_f1", c.macro_f1),
            ] {
                unit(&format!("{}/{n}", c.name), v)?;
            }
            if c.folds.len() != report.k {
                return Err(Error::Invalid(format!("{}: {} folds, expected {}", c.name, c.folds.len(), report.k)));
            }
            if c.folds.iter().map(|f| f.n_test).sum::<usize>() != t.n_samples {
                return Err(Error::Invalid(format!("{}: fold sizes do not cover the samples", c.name)));
            }
            for f in &c.folds {
                unit("fold accuracy", f.accuracy)?;
                unit("fold macro_precision", f.macro_precision)?;
                unit("fold macro_recall", f.macro_recall)?;
                unit("fold macro_f1", f.macro_f1)?;
            }
            for (sni, v) in &c.per_sni_accuracy {
                if !t.labels.contains(sni) {
                    return Err(Error::Invalid(format!("{}: unknown SNI `{sni}`", c.name)));
                }
                unit("per-SNI accuracy", *v)?;
            }
        }
    }
    Ok(report)
}

/// `min_connections,classifier,metric,value` rows for every scored
/// threshold.
pub fn write_metrics_csv<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["min_connections", "classifier", "metric", "value"])?;
    for t in report.thresholds.iter().filter(|t| t.status == ThresholdStatus::Ok) {
        for c in &t.classifiers {
            for (metric, v) in [
                ("accuracy", c.accuracy),
                ("macro_precision", c.macro_precision),
                ("macro_recall", c.macro_recall),
                ("macro_f1", c.macro_f1),
            ] {
                w.write_record([t.min_connections.to_string(), c.name.clone(), metric.to_owned(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `sni,classifier,accuracy` rows for one threshold.
pub fn write_per_sni_csv<W: Write>(threshold: &ThresholdReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sni", "classifier", "accuracy"])?;
    for sni in &threshold.labels {
        for c in &threshold.classifiers {
            if let Some(v) = c.per_sni_accuracy.get(sni) {
                w.write_record([sni.clone(), c.name.clone(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Label set shared by both datasets at a threshold, for callers that
/// want to inspect a filter without running it.
pub fn labels_at(stats: &StatDataset, threshold: usize) -> Result<LabelIndex> {
    Ok(stats.apply_min_connections(threshold)?.label_index)
}
