//! Brute-force reference implementations, evaluated straight from the
//! definitions with no code shared with the library.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sniforge_core::ingest::{Direction, Flow, PacketRecord};

// ---- flow features ----------------------------------------------------------

pub fn o_percentile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = p * (s.len() as f64 - 1.0);
    let (f, c) = (h.floor(), h.ceil());
    s[f as usize] + (h - f) * (s[c as usize] - s[f as usize])
}

/// [count, p25, p50, p75, max, mean, population variance]
pub fn o_group(v: &[f64]) -> [f64; 7] {
    if v.is_empty() {
        return [0.0; 7];
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    [n, o_percentile(v, 0.25), o_percentile(v, 0.5), o_percentile(v, 0.75), max, mean, var]
}

pub fn o_stats(flow: &Flow) -> Vec<f64> {
    let t0 = flow.packets[0].timestamp_us;
    let rel = |p: &PacketRecord| (p.timestamp_us - t0) as f64 / 1e6;
    let pick = |d: Option<Direction>| -> Vec<&PacketRecord> {
        flow.packets.iter().filter(|p| d.is_none_or(|d| p.direction == d)).collect()
    };
    let groups = [pick(Some(Direction::RemoteToLocal)), pick(Some(Direction::LocalToRemote)), pick(None)];
    let mut out = Vec::new();
    for g in &groups {
        out.extend(o_group(&g.iter().map(|p| p.frame_len as f64).collect::<Vec<_>>()));
    }
    for g in &groups {
        let iats: Vec<f64> = (1..g.len()).map(|i| rel(g[i]) - rel(g[i - 1])).collect();
        let s = o_group(&iats);
        out.extend([s[1], s[2], s[3]]);
    }
    for g in &groups[..2] {
        let s = o_group(&g.iter().map(|p| p.payload_len as f64).collect::<Vec<_>>());
        out.extend(&s[1..]);
    }
    out
}

/// Expected (packet, payload, iat_log, direction) at each of `n` steps.
pub fn o_sequence(flow: &Flow, n: usize) -> Vec<(f64, f64, f64, i8)> {
    let take = flow.packets.len().min(n);
    let pad = n - take;
    (0..n)
        .map(|t| {
            if t < pad {
                return (0.0, 0.0, 0.0, 0);
            }
            let i = t - pad;
            let p = &flow.packets[i];
            let iat = if i == 0 {
                0.0
            } else {
                ((p.timestamp_us - flow.packets[i - 1].timestamp_us) as f64 * 1e-6 + 1e-6).ln()
            };
            let dir = if p.direction == Direction::LocalToRemote { 1 } else { -1 };
            (p.frame_len as f64, p.payload_len as f64, iat, dir)
        })
        .collect()
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

// ---- decision tree root split -------------------------------------------------

/// Exact weighted Gini of a split as a fraction (num, den):
/// Σ_side n_s/n · (1 − Σ_k (c_k/n_s)²) = Σ_side (n_s² − Σc²) / (n·n_s).
pub fn gini_fraction(left: &[i128], right: &[i128]) -> (i128, i128) {
    let nl: i128 = left.iter().sum();
    let nr: i128 = right.iter().sum();
    let sq = |c: &[i128]| c.iter().map(|v| v * v).sum::<i128>();
    let n = nl + nr;
    ((nl * nl - sq(left)) * nr + (nr * nr - sq(right)) * nl, n * nl * nr)
}

/// Every feature, every midpoint between distinct sorted values; strictly
/// lower impurity wins, so ties keep the lower feature and threshold.
pub fn oracle_root(x: &[Vec<f64>], y: &[usize], k: usize) -> Option<(usize, f64)> {
    let d = x[0].len();
    let mut best: Option<((i128, i128), usize, f64)> = None;
    for f in 0..d {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let mut left = vec![0i128; k];
            let mut right = vec![0i128; k];
            for (r, &l) in x.iter().zip(y) {
                if r[f] <= thr {
                    left[l] += 1;
                } else {
                    right[l] += 1;
                }
            }
            let g = gini_fraction(&left, &right);
            let better = match &best {
                None => true,
                Some((b, _, _)) => g.0 * b.1 < b.0 * g.1,
            };
            if better {
                best = Some((g, f, thr));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Up to 200 samples, 10 features, 4 classes.
pub fn random_dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, usize) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n = r.random_range(2..=200);
    let d = r.random_range(1..=10);
    let k = r.random_range(2..=4);
    // small integer grids force many exact ties between candidate splits
    let grid = r.random_bool(0.5);
    let x = (0..n)
        .map(|_| (0..d).map(|_| if grid { r.random_range(0..4) as f64 } else { r.random::<f64>() * 10.0 }).collect())
        .collect();
    let y = (0..n).map(|_| r.random_range(0..k)).collect();
    (x, y, k)
}

// ---- ensembles and metrics ---------------------------------------------------

/// Direct evaluation of ½·rf + ⅙·(d1 + d2 + d3) in exact integers over
/// inputs given in hundredths; ties go to the lowest class.
pub fn oracle_combined(rf: &[i64], d1: &[i64], d2: &[i64], d3: &[i64]) -> usize {
    // multiply through by 6 to stay integral: 3·rf + d1 + d2 + d3
    let s: Vec<i64> = (0..rf.len()).map(|c| 3 * rf[c] + d1[c] + d2[c] + d3[c]).collect();
    (0..s.len()).fold(0, |b, c| if s[c] > s[b] { c } else { b })
}

pub struct MacroCase {
    pub pred: &'static [usize],
    pub truth: &'static [usize],
    pub k: usize,
    /// hand-computed (P, R, F1)
    pub want: (f64, f64, f64),
}

pub const MACRO_CASES: [MacroCase; 5] = [
    MacroCase { pred: &[0, 1, 2, 0], truth: &[0, 1, 2, 0], k: 3, want: (1.0, 1.0, 1.0) },
    // all class 0, truth balanced: P=(0.5+0)/2, R=(1+0)/2, F1=(2/3+0)/2
    MacroCase { pred: &[0, 0, 0, 0], truth: &[0, 0, 1, 1], k: 2, want: (0.25, 0.5, 1.0 / 3.0) },
    // class 0: tp1 fp1 fn1 -> P=.5 R=.5 F=.5; class 1: tp1 fp1 fn0 -> P=.5 R=1 F=2/3; class 2: tp0 fp0 fn1 -> 0
    MacroCase { pred: &[0, 1, 1, 0], truth: &[0, 1, 0, 2], k: 3, want: (1.0 / 3.0, 0.5, (0.5 + 2.0 / 3.0) / 3.0) },
    // single class degenerates to accuracy
    MacroCase { pred: &[0, 0, 0], truth: &[0, 0, 0], k: 1, want: (1.0, 1.0, 1.0) },
    // class 3 never occurs and is never predicted: contributes 0 to every mean
    // class 0: tp2 fp1 fn0 -> P=2/3 R=1 F=0.8; class 1: tp1 fp0 fn1 -> P=1 R=.5 F=2/3; class 2: tp1 fp0 fn0 -> 1
    MacroCase {
        pred: &[0, 0, 1, 0, 2],
        truth: &[0, 0, 1, 1, 2],
        k: 4,
        want: ((2.0 / 3.0 + 1.0 + 1.0) / 4.0, (1.0 + 0.5 + 1.0) / 4.0, (0.8 + 2.0 / 3.0 + 1.0) / 4.0),
    },
];
