mod common;

use proptest::prelude::*;
use sniforge_core::dataset::{
    build_datasets, kfold_split, read_seq_csv, read_stat_csv, stratified_holdout, write_seq_csv, write_stat_csv,
    FoldPlan, LabelIndex, LabeledDataset,
};
use sniforge_core::Error;

fn named(counts: &[(&str, usize)]) -> LabeledDataset<usize> {
    let mut names = Vec::new();
    // interleave classes so order preservation is visible
    let max = counts.iter().map(|c| c.1).max().unwrap_or(0);
    for i in 0..max {
        for (n, c) in counts {
            if i < *c {
                names.push((*n).to_owned());
            }
        }
    }
    let samples = (0..names.len()).collect();
    LabeledDataset::from_named(samples, &names, vec!["fixture".into()]).unwrap()
}

#[test]
fn min_connections_drops_small_classes() {
    let ds = named(&[("a", 150), ("b", 90)]);
    let f = ds.apply_min_connections(100).unwrap();
    assert_eq!(f.label_index.names(), ["a"]);
    assert_eq!(f.len(), 150);
    assert!(f.labels.iter().all(|&l| l == 0));
    assert!(f.samples.windows(2).all(|w| w[0] < w[1]), "order preserved");
}

#[test]
fn threshold_one_is_a_no_op() {
    let ds = named(&[("x", 3), ("y", 1), ("z", 2)]);
    assert_eq!(ds.apply_min_connections(1).unwrap(), ds);
}

#[test]
fn filtering_everything_is_an_error() {
    let ds = named(&[("x", 3)]);
    assert!(matches!(ds.apply_min_connections(4), Err(Error::NoClassesLeft { threshold: 4 })));
    assert!(ds.apply_min_connections(0).is_err());
}

#[test]
fn compaction_remaps_indices() {
    let ds = named(&[("a", 2), ("b", 5), ("c", 5)]);
    let f = ds.apply_min_connections(5).unwrap();
    assert_eq!(f.label_index.names(), ["b", "c"]);
    for (s, l) in f.samples.iter().zip(&f.labels) {
        assert_eq!(ds.label_index.name(ds.labels[*s]), f.label_index.name(*l));
    }
}

proptest! {
    #[test]
    fn filter_is_monotone(counts in proptest::collection::vec(1usize..60, 1..8), t1 in 1usize..60, t2 in 1usize..60) {
        let labels: Vec<String> = (0..counts.len()).map(|i| format!("c{i}")).collect();
        let pairs: Vec<(&str, usize)> = labels.iter().map(String::as_str).zip(counts.iter().copied()).collect();
        let ds = named(&pairs);
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let size = |t| ds.apply_min_connections(t).map(|d| (d.n_classes(), d.len())).unwrap_or((0, 0));
        let (a, b) = (size(lo), size(hi));
        prop_assert!(b.0 <= a.0 && b.1 <= a.1);
        if let Ok(f) = ds.apply_min_connections(hi) {
            prop_assert!(f.class_counts().iter().all(|&c| c >= hi));
        }
    }

    #[test]
    fn folds_partition_and_stratify(counts in proptest::collection::vec(10usize..40, 1..6), k in 2usize..11, seed in any::<u64>()) {
        let labels: Vec<String> = (0..counts.len()).map(|i| format!("c{i}")).collect();
        let pairs: Vec<(&str, usize)> = labels.iter().map(String::as_str).zip(counts.iter().copied()).collect();
        let ds = named(&pairs);
        let plan = kfold_split(&ds.labels, &ds.label_index, k, seed).unwrap();
        let mut seen = vec![0; ds.len()];
        for f in 0..k {
            for i in plan.test_indices(f) {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for c in 0..ds.n_classes() {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| plan.test_indices(f).iter().filter(|&&i| ds.labels[i] == c).count())
                .collect();
            let (mn, mx) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            prop_assert!(mx - mn <= 1);
        }
        let sizes: Vec<usize> = (0..k).map(|f| plan.test_indices(f).len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}

#[test]
fn ten_folds_of_ten() {
    let ds = named(&[("only", 100)]);
    let plan = kfold_split(&ds.labels, &ds.label_index, 10, 3).unwrap();
    for f in 0..10 {
        assert_eq!(plan.test_indices(f).len(), 10);
        assert_eq!(plan.train_indices(f).len(), 90);
    }
}

#[test]
fn two_classes_of_twenty() {
    let ds = named(&[("a", 20), ("b", 20)]);
    let plan = kfold_split(&ds.labels, &ds.label_index, 10, 11).unwrap();
    for f in 0..10 {
        let t = plan.test_indices(f);
        assert_eq!(t.iter().filter(|&&i| ds.labels[i] == 0).count(), 2);
        assert_eq!(t.iter().filter(|&&i| ds.labels[i] == 1).count(), 2);
    }
}

#[test]
fn fold_plans_are_seeded() {
    let ds = named(&[("a", 37), ("b", 23)]);
    let a = kfold_split(&ds.labels, &ds.label_index, 10, 5).unwrap();
    let b = kfold_split(&ds.labels, &ds.label_index, 10, 5).unwrap();
    let c = kfold_split(&ds.labels, &ds.label_index, 10, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.assignments, c.assignments);
    let profile = |p: &FoldPlan| {
        let mut s: Vec<usize> = (0..10).map(|f| p.test_indices(f).len()).collect();
        s.sort();
        s
    };
    assert_eq!(profile(&a), profile(&c));
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<FoldPlan>(&json).unwrap(), a);
}

#[test]
fn small_class_is_named_in_error() {
    let ds = named(&[("big", 30), ("tiny", 4)]);
    match kfold_split(&ds.labels, &ds.label_index, 10, 0) {
        Err(Error::ClassTooSmall { class, count: 4, k: 10 }) => assert_eq!(class, "tiny"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn holdout_is_stratified_and_disjoint() {
    let ds = named(&[("a", 50), ("b", 30), ("c", 1)]);
    let idx: Vec<usize> = (0..ds.len()).collect();
    let (fit, hold) = stratified_holdout(&ds.labels, &idx, ds.n_classes(), 0.1, 9);
    assert_eq!(fit.len() + hold.len(), ds.len());
    assert!(fit.iter().all(|i| !hold.contains(i)));
    let count = |c| hold.iter().filter(|&&i| ds.labels[i] == c).count();
    assert_eq!((count(0), count(1), count(2)), (5, 3, 0));
}

#[test]
fn csv_round_trips() {
    let flows: Vec<_> = (0..12)
        .map(|s| {
            let mut f = common::random_flow(s);
            f.sni = Some(["a.com", "b.org", "c.net"][s as usize % 3].into());
            f
        })
        .collect();
    let (stats, seqs) = build_datasets(&flows, 25, vec!["day1.pcap".into()]).unwrap();
    let run = serde_json::json!({"seed": 42});

    let mut buf = Vec::new();
    write_stat_csv(&stats, Some(&run), &mut buf).unwrap();
    let (back, r) = read_stat_csv(buf.as_slice()).unwrap();
    assert_eq!(back, stats);
    assert_eq!(r, Some(run.clone()));

    let mut buf = Vec::new();
    write_seq_csv(&seqs, true, None, &mut buf).unwrap();
    let (back, has_dir, _) = read_seq_csv(buf.as_slice()).unwrap();
    assert!(has_dir);
    assert_eq!(back, seqs);

    let mut buf = Vec::new();
    write_seq_csv(&seqs, false, None, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 1 + 75);
    let (back, has_dir, _) = read_seq_csv(buf.as_slice()).unwrap();
    assert!(!has_dir);
    assert_eq!(back.samples[0].packet_size, seqs.samples[0].packet_size);
    assert!(back.samples.iter().all(|s| s.direction.iter().all(|d| *d == 0)));
}

#[test]
fn label_index_is_sorted_bijection() {
    let idx = LabelIndex::from_labels(["z", "a", "m", "a"]);
    assert_eq!(idx.names(), ["a", "m", "z"]);
    for (i, n) in idx.names().iter().enumerate() {
        assert_eq!(idx.index_of(n), Some(i));
    }
    assert_eq!(idx.index_of("q"), None);
}
