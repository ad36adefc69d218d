use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde_json::json;
use sniforge_core::dataset::{
    build_datasets, read_seq_csv, read_stat_csv, stratified_holdout, write_seq_csv, write_stat_csv, SequenceDataset,
    StatDataset,
};
use sniforge_core::experiment::{
    derive_seed, run_experiment, sequence_tensor, validate_report, write_metrics_csv, write_per_sni_csv, ClassifierSet,
    EvalReport, ExperimentConfig, ThresholdStatus,
};
use sniforge_core::features::Channel;
use sniforge_core::forest::{train_forest, ForestConfig};
use sniforge_core::ingest::{assemble_flows, parse_capture, read_flows, write_flows, CaptureSummary, LocalNets};
use sniforge_core::meta::write_meta_line;
use sniforge_core::synth::{emit_pcap, generate_flows, separable_profiles, SynthConfig};
use sniforge_neural::artifact::write_network;
use sniforge_neural::{build_baseline_rnn, build_cnn_rnn, fit, AdamConfig, Network, SequenceSet, TrainConfig};
use tracing::info;

use crate::output::{check_input, check_output, check_output_dir, file_name, print_json, with_meta, RunConfig, Staged};
use crate::{EvaluateArgs, FeaturizeArgs, IngestArgs, ModelKind, NeuralArgs, ReportArgs, SynthArgs, TrainArgs};

fn local_nets(nets: &[sniforge_core::ingest::Ipv4Cidr]) -> Result<LocalNets> {
    Ok(if nets.is_empty() { LocalNets::rfc1918() } else { LocalNets::new(nets.to_vec())? })
}

fn open(p: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?))
}

fn read_stats(p: &Path) -> Result<StatDataset> {
    let (ds, _) = read_stat_csv(open(p)?).with_context(|| format!("reading {}", p.display()))?;
    Ok(ds)
}

fn read_seqs(p: &Path) -> Result<(SequenceDataset, bool)> {
    let (ds, dir, _) = read_seq_csv(open(p)?).with_context(|| format!("reading {}", p.display()))?;
    Ok((ds, dir))
}

pub fn ingest(a: &IngestArgs, seed: u64) -> Result<()> {
    for p in &a.pcaps {
        check_input(p)?;
    }
    check_output(&a.out)?;
    let nets = local_nets(&a.local_nets)?;

    let mut capture = CaptureSummary::default();
    let mut packets = Vec::new();
    for p in &a.pcaps {
        let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
        let parsed = parse_capture(&bytes).with_context(|| format!("parsing {}", p.display()))?;
        info!(file = %p.display(), records = parsed.summary.records, tcp = parsed.summary.tcp_packets, "capture parsed");
        capture.merge(&parsed.summary);
        packets.extend(parsed.packets);
    }
    let assembly = assemble_flows(&packets, &nets);
    info!(flows = assembly.summary.flows_kept, "flows assembled");

    let nets_str: Vec<String> = nets.nets().iter().map(ToString::to_string).collect();
    let inputs: Vec<&Path> = a.pcaps.iter().map(|p| p.as_path()).collect();
    let run = RunConfig::new("ingest", seed, &inputs, json!({ "local_nets": nets_str }))?.to_value();
    let mut staged = Staged::default();
    staged.add(&a.out, |w| Ok(write_flows(&assembly.flows, Some(&json!({ "run": run })), w)?))?;
    staged.commit()?;
    print_json(&json!({
        "files": a.pcaps.len(),
        "capture": capture,
        "flows": assembly.summary,
        "skipped_packets": capture.records - capture.tcp_packets + assembly.summary.excluded_packets(),
    }))
}

pub fn featurize(a: &FeaturizeArgs, seed: u64) -> Result<()> {
    check_input(&a.flows)?;
    check_output(&a.stats)?;
    check_output(&a.sequences)?;
    ensure!(a.stats != a.sequences, "--stats and --sequences must differ");
    ensure!(a.n >= 1, "--n must be at least 1");
    let (_, flows) = read_flows(open(&a.flows)?).with_context(|| format!("reading {}", a.flows.display()))?;
    let (stats, seqs) = build_datasets(&flows, a.n, vec![file_name(&a.flows)])?;
    let run = RunConfig::new("featurize", seed, &[&a.flows], json!({ "n": a.n, "direction": a.direction }))?.to_value();
    let mut staged = Staged::default();
    staged.add(&a.stats, |w| Ok(write_stat_csv(&stats, Some(&run), w)?))?;
    staged.add(&a.sequences, |w| Ok(write_seq_csv(&seqs, a.direction, Some(&run), w)?))?;
    staged.commit()?;
    print_json(&json!({ "rows": stats.len(), "classes": stats.n_classes(), "n": a.n, "direction": a.direction }))
}

pub fn synth(a: &SynthArgs, seed: u64) -> Result<()> {
    check_output(&a.out)?;
    if let Some(f) = &a.flows {
        check_output(f)?;
        ensure!(*f != a.out, "--flows and --out must differ");
    }
    let nets = local_nets(&a.local_nets)?;
    let config = match &a.profiles {
        Some(p) => {
            check_input(p)?;
            serde_json::from_reader(open(p)?).with_context(|| format!("parsing {}", p.display()))?
        }
        None => {
            ensure!(a.classes >= 1, "--classes must be at least 1");
            SynthConfig { flows_per_class: a.flows_per_class, profiles: separable_profiles(a.classes, seed) }
        }
    };
    let flows = generate_flows(&config.profiles, config.flows_per_class)?;
    let pcap = emit_pcap(&flows, &nets)?;
    let inputs: Vec<&Path> = a.profiles.iter().map(|p| p.as_path()).collect();
    let run = RunConfig::new("synth", seed, &inputs, &config)?.to_value();
    let mut staged = Staged::default();
    staged.add(&a.out, |w| Ok(w.write_all(&pcap)?))?;
    if let Some(f) = &a.flows {
        staged.add(f, |w| Ok(write_flows(&flows, Some(&json!({ "run": run })), w)?))?;
    }
    staged.commit()?;
    print_json(&json!({
        "classes": config.profiles.len(),
        "flows": flows.len(),
        "packets": flows.iter().map(|f| f.len()).sum::<usize>(),
        "pcap_bytes": pcap.len(),
    }))
}

fn train_config(n: &NeuralArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: n.batch_size,
        adam: AdamConfig { learning_rate: n.learning_rate, ..AdamConfig::default() },
        max_epochs: n.max_epochs,
        patience: n.patience,
        seed,
    }
}

pub fn train(a: &TrainArgs, seed: u64) -> Result<()> {
    check_output(&a.out)?;
    let input = if a.model == ModelKind::Rf { a.stats.as_ref() } else { a.sequences.as_ref() };
    let input = input.context("missing dataset argument")?;
    check_input(input)?;
    let params = json!({
        "model": params_model(a.model),
        "min_connections": a.min_connections,
        "direction": a.direction,
        "trees": a.trees,
        "arch": format!("{:?}", a.neural.arch).to_lowercase(),
        "max_epochs": a.neural.max_epochs,
        "patience": a.neural.patience,
        "batch_size": a.neural.batch_size,
        "learning_rate": a.neural.learning_rate,
        "holdout": a.neural.holdout,
        "baseline_hidden": a.neural.baseline_hidden,
    });
    let run = RunConfig::new("train", seed, &[input], params)?.to_value();
    let mut staged = Staged::default();

    let summary = if a.model == ModelKind::Rf {
        let ds = read_stats(input)?.apply_min_connections(a.min_connections)?;
        let cfg = ForestConfig { n_trees: a.trees, seed: derive_seed(seed, &[0]), ..ForestConfig::default() };
        let forest = train_forest(&ds.samples, &ds.labels, ds.n_classes(), &cfg)?;
        let meta = json!({ "run": run, "labels": ds.label_index.names() });
        staged.add(&a.out, |mut w| {
            write_meta_line(&mut w, &meta)?;
            forest.write_json(&mut w)?;
            writeln!(w)?;
            Ok(())
        })?;
        json!({ "model": "rf", "classes": ds.n_classes(), "samples": ds.len(), "trees": forest.trees.len() })
    } else {
        let (ds, has_dir) = read_seqs(input)?;
        ensure!(!a.direction || has_dir, "{} has no direction channel (featurize with --direction)", input.display());
        let ds = ds.apply_min_connections(a.min_connections)?;
        let mut channels = match a.model {
            ModelKind::Packet => vec![Channel::PacketSize],
            ModelKind::Payload => vec![Channel::PayloadSize],
            ModelKind::Iat => vec![Channel::IatLog],
            _ => vec![Channel::PacketSize, Channel::PayloadSize, Channel::IatLog],
        };
        if a.direction {
            channels.push(Channel::Direction);
        }
        let seq_len = ds.samples.first().map_or(0, |s| s.len());
        let spec = match a.model {
            ModelKind::BaselineRnn => {
                build_baseline_rnn(ds.n_classes(), seq_len, channels.len(), a.neural.baseline_hidden)?
            }
            kind => {
                build_cnn_rnn(ds.n_classes(), seq_len, channels.len(), &a.neural.arch.widths(), kind == ModelKind::Iat)?
            }
        };
        let all: Vec<usize> = (0..ds.len()).collect();
        let (fit_rows, hold_rows) =
            stratified_holdout(&ds.labels, &all, ds.n_classes(), a.neural.holdout, derive_seed(seed, &[1]));
        ensure!(!hold_rows.is_empty(), "too few samples per class for an early-stopping split");
        let set = |rows: &[usize]| -> Result<SequenceSet> {
            let y = rows.iter().map(|&i| ds.labels[i]).collect();
            Ok(SequenceSet::new(sequence_tensor(&ds, rows, &channels)?, y)?)
        };
        let mut net = Network::new(spec, derive_seed(seed, &[2]))?;
        let history =
            fit(&mut net, &set(&fit_rows)?, &set(&hold_rows)?, &train_config(&a.neural, derive_seed(seed, &[3])))?;
        info!(epochs = history.epochs_run, best_epoch = history.best_epoch, "trained");
        let channel_names: Vec<String> = channels.iter().map(|c| format!("{c:?}")).collect();
        let meta = json!({
            "run": run,
            "labels": ds.label_index.names(),
            "channels": channel_names,
            "history": history,
        });
        staged.add(&a.out, |w| Ok(write_network(&net, meta, w)?))?;
        json!({
            "model": params_model(a.model),
            "classes": ds.n_classes(),
            "samples": ds.len(),
            "epochs_run": history.epochs_run,
            "best_epoch": history.best_epoch,
            "best_val_loss": history.val_loss[history.best_epoch - 1],
        })
    };
    staged.commit()?;
    print_json(&summary)
}

fn params_model(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Rf => "rf",
        ModelKind::Packet => "packet",
        ModelKind::Payload => "payload",
        ModelKind::Iat => "iat",
        ModelKind::BaselineRnn => "baseline-rnn",
    }
}

fn stage_plots(staged: &mut Staged, dir: &Path, report: &EvalReport) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    staged.add(&dir.join("metrics.csv"), with_meta(&report.run_config, |w| write_metrics_csv(report, w)))?;
    for t in report.thresholds.iter().filter(|t| t.status == ThresholdStatus::Ok) {
        let path = dir.join(format!("per_sni_min{}.csv", t.min_connections));
        staged.add(&path, with_meta(&report.run_config, |w| write_per_sni_csv(t, w)))?;
    }
    Ok(())
}

fn accuracy_summary(report: &EvalReport) -> serde_json::Value {
    let rows: Vec<_> = report
        .thresholds
        .iter()
        .map(|t| {
            let acc: serde_json::Map<_, _> =
                t.classifiers.iter().map(|c| (c.name.clone(), json!(c.accuracy))).collect();
            json!({ "min_connections": t.min_connections, "status": t.status, "classes": t.n_classes, "accuracy": acc })
        })
        .collect();
    json!({ "thresholds": rows })
}

pub fn evaluate(a: &EvaluateArgs, seed: u64) -> Result<()> {
    check_input(&a.stats)?;
    check_input(&a.sequences)?;
    check_output(&a.out)?;
    if let Some(p) = &a.plots {
        check_output_dir(p)?;
    }
    let cfg = ExperimentConfig {
        thresholds: a.thresholds.clone(),
        k: a.k,
        seed,
        classifiers: ClassifierSet::parse(&a.classifiers)?,
        direction: a.direction,
        n_trees: a.trees,
        widths: a.neural.arch.widths(),
        baseline_hidden: a.neural.baseline_hidden,
        batch_size: a.neural.batch_size,
        max_epochs: a.neural.max_epochs,
        patience: a.neural.patience,
        learning_rate: a.neural.learning_rate,
        holdout_fraction: a.neural.holdout,
        weights: a.weights.unwrap_or(sniforge_core::ensemble::COMBINED_WEIGHTS),
        rf_log_proba: a.rf_log_proba,
        record_timing: a.record_timing,
    };
    cfg.validate()?;
    let stats = read_stats(&a.stats)?;
    let (seqs, has_dir) = read_seqs(&a.sequences)?;
    if a.direction && !has_dir {
        bail!("{} has no direction channel (featurize with --direction)", a.sequences.display());
    }
    let run = RunConfig::new("evaluate", seed, &[&a.stats, &a.sequences], &cfg)?.to_value();
    let report = run_experiment(&stats, &seqs, has_dir, &cfg, run)?;

    let mut staged = Staged::default();
    staged.add(&a.out, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)?;
        Ok(())
    })?;
    if let Some(p) = &a.plots {
        stage_plots(&mut staged, p, &report)?;
    }
    staged.commit()?;
    print_json(&accuracy_summary(&report))
}

pub fn report(a: &ReportArgs) -> Result<()> {
    check_input(&a.report)?;
    if let Some(p) = &a.plots {
        check_output_dir(p)?;
    }
    let text = fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let report = validate_report(&text).with_context(|| format!("validating {}", a.report.display()))?;
    if let Some(p) = &a.plots {
        let mut staged = Staged::default();
        stage_plots(&mut staged, p, &report)?;
        staged.commit()?;
    }
    if a.json {
        return print_json(&report);
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:>8}  {:<18} {:>8} {:>8} {:>8} {:>8}", "min_conn", "classifier", "acc", "prec", "recall", "f1")?;
    for t in &report.thresholds {
        if t.status == ThresholdStatus::Skipped {
            writeln!(out, "{:>8}  skipped: {}", t.min_connections, t.reason.as_deref().unwrap_or(""))?;
            continue;
        }
        for c in &t.classifiers {
            writeln!(
                out,
                "{:>8}  {:<18} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                t.min_connections, c.name, c.accuracy, c.macro_precision, c.macro_recall, c.macro_f1
            )?;
        }
    }
    Ok(())
}
