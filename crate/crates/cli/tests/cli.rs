use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sniforge_core::experiment::{validate_report, EvalReport};
use sniforge_core::forest::RandomForest;
use sniforge_core::ingest::LocalNets;
use sniforge_core::meta::split_meta;
use sniforge_core::synth::{emit_pcap, generate_flows, separable_profiles};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sniforge"));
    c.env_remove("SNIFORGE_SEED").env_remove("SNIFORGE_LOG");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = run_in(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.trim()).unwrap_or(Value::Null)
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

/// 3 classes × `per_class` flows, ingested and featurized with direction.
fn prepared(per_class: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let pc = per_class.to_string();
    ok(dir.path(), &["synth", "-o", "c.pcap", "--classes", "3", "--flows-per-class", &pc]);
    ok(dir.path(), &["ingest", "c.pcap", "-o", "flows.csv"]);
    ok(dir.path(), &["featurize", "flows.csv", "--stats", "s.csv", "--sequences", "q.csv", "--direction"]);
    dir
}

const QUICK_NN: [&str; 6] = ["--arch", "small", "--max-epochs", "2", "--trees", "10"];

fn evaluate(dir: &Path, out: &str, extra: &[&str]) -> EvalReport {
    let mut args =
        vec!["evaluate", "--stats", "s.csv", "--sequences", "q.csv", "-o", out, "--k", "3", "--thresholds", "5"];
    args.extend(QUICK_NN);
    args.extend(extra);
    ok(dir, &args);
    validate_report(&fs::read_to_string(dir.join(out)).unwrap()).unwrap()
}

fn data_rows(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with('#')).skip(1).map(str::to_owned).collect()
}

#[test]
fn ingest_summary_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let flows = generate_flows(&separable_profiles(2, 3), 6).unwrap();
    let packets: usize = flows.iter().map(|f| f.len()).sum();
    fs::write(dir.path().join("f.pcap"), emit_pcap(&flows, &LocalNets::rfc1918()).unwrap()).unwrap();
    let s = ok(dir.path(), &["ingest", "f.pcap", "-o", "flows.csv"]);
    assert_eq!(s["files"], 1);
    assert_eq!(s["capture"]["records"], packets);
    assert_eq!(s["flows"]["flows_kept"], 12);
    assert_eq!(s["flows"]["kept_packets"], packets);
    assert_eq!(s["flows"]["flows_dropped_unknown_sni"], 0);
    assert_eq!(s["skipped_packets"], 0);
    assert_eq!(data_rows(&dir.path().join("flows.csv")).len(), 12);
}

#[test]
fn ingest_with_other_local_net_drops_everything() {
    let dir = tempfile::tempdir().unwrap();
    let flows = generate_flows(&separable_profiles(1, 3), 4).unwrap();
    let packets: usize = flows.iter().map(|f| f.len()).sum();
    fs::write(dir.path().join("f.pcap"), emit_pcap(&flows, &LocalNets::rfc1918()).unwrap()).unwrap();
    let s = ok(dir.path(), &["ingest", "f.pcap", "-o", "flows.csv", "--local-net", "172.16.0.0/12"]);
    assert_eq!(s["flows"]["flows_kept"], 0);
    assert_eq!(s["flows"]["undecidable_packets"], packets);
    assert_eq!(s["skipped_packets"], packets);
}

#[test]
fn empty_capture_gives_zero_flows() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e.pcap"), emit_pcap(&[], &LocalNets::rfc1918()).unwrap()).unwrap();
    let s = ok(dir.path(), &["ingest", "e.pcap", "-o", "flows.csv"]);
    assert_eq!(s["flows"]["flows_kept"], 0);
    assert!(data_rows(&dir.path().join("flows.csv")).is_empty());
}

#[test]
fn missing_or_bad_input_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    fails(dir.path(), &["ingest", "nope.pcap", "-o", "flows.csv"]);
    fs::write(dir.path().join("junk.pcap"), b"definitely not a capture").unwrap();
    fails(dir.path(), &["ingest", "junk.pcap", "-o", "flows.csv"]);
    fails(dir.path(), &["ingest", "junk.pcap", "-o", "missing-dir/flows.csv"]);
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["junk.pcap"]);
}

#[test]
fn featurize_rows_columns_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "-o", "c.pcap", "--classes", "2", "--flows-per-class", "5", "--flows", "truth.csv"]);
    ok(dir.path(), &["featurize", "truth.csv", "--stats", "s.csv", "--sequences", "q.csv"]);
    ok(dir.path(), &["featurize", "truth.csv", "--stats", "s2.csv", "--sequences", "qd.csv", "--direction"]);
    let p = |n: &str| dir.path().join(n);
    assert_eq!(data_rows(&p("s.csv")).len(), 10);
    assert_eq!(data_rows(&p("q.csv")).len(), 10);
    let cols = |n: &str| data_rows(&p(n))[0].split(',').count();
    assert_eq!(cols("s.csv"), 43);
    assert_eq!(cols("qd.csv"), cols("q.csv") + 25);
    assert_eq!(data_rows(&p("s.csv")), data_rows(&p("s2.csv")));
    ok(dir.path(), &["featurize", "truth.csv", "--stats", "s3.csv", "--sequences", "q3.csv"]);
    assert_eq!(fs::read(p("q.csv")).unwrap(), fs::read(p("q3.csv")).unwrap());
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let synth = |out: &str, env: Option<&str>, flag: Option<&str>| {
        let mut c = bin();
        c.current_dir(dir.path()).args(["synth", "-o", out, "--classes", "2", "--flows-per-class", "3"]);
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        if let Some(s) = env {
            c.env("SNIFORGE_SEED", s);
        }
        assert!(c.output().unwrap().status.success());
        fs::read(dir.path().join(out)).unwrap()
    };
    let env7 = synth("a.pcap", Some("7"), None);
    assert_eq!(env7, synth("b.pcap", None, Some("7")));
    assert_eq!(synth("c.pcap", Some("8"), Some("7")), env7);
    assert_ne!(env7, synth("d.pcap", None, None));
    assert_eq!(synth("e.pcap", None, None), synth("f.pcap", Some("42"), None));
}

#[test]
fn synth_reads_profile_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({ "flows_per_class": 4, "profiles": separable_profiles(2, 1) });
    fs::write(dir.path().join("p.json"), cfg.to_string()).unwrap();
    let s = ok(dir.path(), &["synth", "--profiles", "p.json", "-o", "c.pcap", "--flows", "f.csv"]);
    assert_eq!((s["classes"].as_u64(), s["flows"].as_u64()), (Some(2), Some(8)));
    let text = fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let (meta, _) = split_meta(&text).unwrap();
    assert_eq!(meta.unwrap()["run"]["params"]["flows_per_class"], 4);
    fs::write(dir.path().join("bad.json"), r#"{"flows_per_class": 1, "profiles": []}"#).unwrap();
    fails(dir.path(), &["synth", "--profiles", "bad.json", "-o", "x.pcap"]);
    assert!(!dir.path().join("x.pcap").exists());
}

#[test]
fn trained_artifacts_load_back() {
    let dir = prepared(8);
    let s = ok(dir.path(), &["train", "--model", "rf", "--stats", "s.csv", "-o", "rf.json", "--trees", "7"]);
    assert_eq!(s["trees"], 7);
    let text = fs::read_to_string(dir.path().join("rf.json")).unwrap();
    let (meta, body) = split_meta(&text).unwrap();
    let meta = meta.unwrap();
    assert_eq!(meta["run"]["subcommand"], "train");
    assert_eq!(meta["labels"].as_array().unwrap().len(), 3);
    let forest = RandomForest::read_json(body.as_bytes()).unwrap();
    assert_eq!((forest.trees.len(), forest.n_features, forest.n_classes), (7, 42, 3));

    let mut args = vec!["train", "--model", "packet", "--sequences", "q.csv", "-o", "p.nn", "--direction"];
    args.extend(QUICK_NN);
    let s = ok(dir.path(), &args);
    assert!(s["epochs_run"].as_u64().unwrap() <= 2);
    let bytes = fs::read(dir.path().join("p.nn")).unwrap();
    let (net, meta) = sniforge_neural::artifact::read_network(&bytes[..]).unwrap();
    assert_eq!(net.spec().input_channels, 2);
    assert_eq!(meta["channels"], serde_json::json!(["PacketSize", "Direction"]));
    assert_eq!(meta["run"]["params"]["model"], "packet");
}

#[test]
fn direction_requires_direction_columns() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "-o", "c.pcap", "--classes", "2", "--flows-per-class", "6", "--flows", "f.csv"]);
    ok(dir.path(), &["featurize", "f.csv", "--stats", "s.csv", "--sequences", "q.csv"]);
    let err = fails(
        dir.path(),
        &["evaluate", "--stats", "s.csv", "--sequences", "q.csv", "-o", "r.json", "--k", "2", "--direction"],
    );
    assert!(err.contains("direction"), "{err}");
    assert!(!dir.path().join("r.json").exists());
}

#[test]
fn evaluate_report_validates_and_plots_match_report_command() {
    let dir = prepared(8);
    let report = evaluate(dir.path(), "r.json", &["--plots", "plots"]);
    let names: Vec<&str> = report.thresholds[0].classifiers.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["rf", "packet", "payload", "iat", "dl-ensemble", "combined"]);
    assert_eq!(report.run_config["subcommand"], "evaluate");
    assert_eq!(report.run_config["inputs"], serde_json::json!(["s.csv", "q.csv"]));

    ok(dir.path(), &["report", "r.json", "--plots", "again", "--json"]);
    for f in ["metrics.csv", "per_sni_min5.csv"] {
        let a = fs::read(dir.path().join("plots").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("again").join(f)).unwrap(), "{f}");
    }
    let out = run_in(dir.path(), &["report", "r.json"]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.contains("combined")));

    fs::write(dir.path().join("broken.json"), "{\"format\": \"x\"}").unwrap();
    fails(dir.path(), &["report", "broken.json"]);
}

#[test]
fn rf_only_skips_neural_training() {
    let dir = prepared(8);
    let report = evaluate(dir.path(), "r.json", &["--classifiers", "rf-only"]);
    let t = &report.thresholds[0];
    assert_eq!(t.classifiers.len(), 1);
    assert!(t.classifiers[0].training.is_none());
    let log = run_in(
        dir.path(),
        &[
            "evaluate",
            "--stats",
            "s.csv",
            "--sequences",
            "q.csv",
            "-o",
            "r2.json",
            "--k",
            "3",
            "--thresholds",
            "5",
            "--classifiers",
            "rf-only",
        ],
    );
    assert!(!String::from_utf8(log.stderr).unwrap().contains("\"trained\""));
}

#[test]
fn normalized_weights_reproduce_default_combination() {
    let dir = prepared(8);
    let a = evaluate(dir.path(), "a.json", &[]);
    let b = evaluate(dir.path(), "b.json", &["--weights", "0.5,0.1667,0.1667,0.1667"]);
    let combined = |r: &EvalReport| r.thresholds[0].classifiers.iter().find(|c| c.name == "combined").unwrap().clone();
    assert_eq!(combined(&a), combined(&b));
    fails(dir.path(), &["evaluate", "--stats", "s.csv", "--sequences", "q.csv", "-o", "c.json", "--weights", "1,2"]);
}

#[test]
fn single_thread_runs_are_bitwise_identical() {
    let dir = prepared(6);
    evaluate(dir.path(), "a.json", &["--jobs", "1"]);
    evaluate(dir.path(), "b.json", &["--jobs", "1"]);
    evaluate(dir.path(), "c.json", &["--jobs", "2"]);
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.json"), read("c.json"));
}

#[test]
fn logs_are_json_lines_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["synth", "-o", "c.pcap", "--classes", "2", "--flows-per-class", "3"]);
    assert!(out.status.success());
    let out = run_in(dir.path(), &["ingest", "c.pcap", "-o", "f.csv"]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(!stderr.is_empty());
    for line in stderr.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["level"].is_string());
    }
    // stdout carries exactly one JSON document
    assert!(serde_json::from_slice::<Value>(&out.stdout).is_ok());
}

#[test]
fn every_artifact_embeds_the_run_config() {
    let dir = prepared(6);
    let meta_of = |n: &str| {
        let text = fs::read_to_string(dir.path().join(n)).unwrap();
        split_meta(&text).unwrap().0.unwrap()
    };
    assert_eq!(meta_of("flows.csv")["run"]["subcommand"], "ingest");
    assert_eq!(meta_of("s.csv")["run"]["subcommand"], "featurize");
    assert_eq!(meta_of("q.csv")["run"]["seed"], 42);
    let p: PathBuf = dir.path().join("s.csv");
    assert!(fs::metadata(p).unwrap().len() > 0);
}
