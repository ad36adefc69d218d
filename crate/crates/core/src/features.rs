//! Per-flow features: the 42 summary statistics used by the forest and the
//! fixed-length sequences used by the neural models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Direction, Flow, PacketRecord};

pub const STAT_FEATURE_COUNT: usize = 42;
pub const DEFAULT_SEQ_LEN: usize = 25;
/// Floor added to inter-arrival seconds before taking the log.
pub const IAT_EPSILON: f64 = 1e-6;

/// Column order of [`StatFeatureVector`].
///
/// `r2l` is remote→local, `l2r` local→remote, `all` both directions merged
/// in time order. Inter-arrival values are in seconds.
#[rustfmt::skip]
pub const STAT_FEATURE_NAMES: [&str; STAT_FEATURE_COUNT] = [
    "pkt_r2l_count", "pkt_r2l_p25", "pkt_r2l_p50", "pkt_r2l_p75", "pkt_r2l_max", "pkt_r2l_mean", "pkt_r2l_var",
    "pkt_l2r_count", "pkt_l2r_p25", "pkt_l2r_p50", "pkt_l2r_p75", "pkt_l2r_max", "pkt_l2r_mean", "pkt_l2r_var",
    "pkt_all_count", "pkt_all_p25", "pkt_all_p50", "pkt_all_p75", "pkt_all_max", "pkt_all_mean", "pkt_all_var",
    "iat_r2l_p25", "iat_r2l_p50", "iat_r2l_p75",
    "iat_l2r_p25", "iat_l2r_p50", "iat_l2r_p75",
    "iat_all_p25", "iat_all_p50", "iat_all_p75",
    "pay_r2l_p25", "pay_r2l_p50", "pay_r2l_p75", "pay_r2l_max", "pay_r2l_mean", "pay_r2l_var",
    "pay_l2r_p25", "pay_l2r_p50", "pay_l2r_p75", "pay_l2r_max", "pay_l2r_mean", "pay_l2r_var",
];

/// Linear-interpolation percentile, `p` in `[0, 1]`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile of no values".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::PercentileRange(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Summary {
    count: f64,
    p25: f64,
    p50: f64,
    p75: f64,
    max: f64,
    mean: f64,
    var: f64,
}

/// All zeros for an empty group. Variance is the population variance.
fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary { count: 0.0, p25: 0.0, p50: 0.0, p75: 0.0, max: 0.0, mean: 0.0, var: 0.0 };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Summary {
        count: n,
        p25: percentile_sorted(&sorted, 0.25),
        p50: percentile_sorted(&sorted, 0.5),
        p75: percentile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean,
        var,
    }
}

/// Consecutive differences in seconds, computed on integer microseconds.
fn inter_arrivals(packets: &[&PacketRecord]) -> Vec<f64> {
    packets.windows(2).map(|w| (w[1].timestamp_us - w[0].timestamp_us) as f64 / 1e6).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatFeatureVector(pub Vec<f64>);

impl StatFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        STAT_FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }
}

/// The 42 statistics in [`STAT_FEATURE_NAMES`] order.
///
/// A direction without packets contributes zeros; a group with fewer than
/// two packets has zero inter-arrival statistics.
pub fn stat_features(flow: &Flow) -> StatFeatureVector {
    let all: Vec<&PacketRecord> = flow.packets.iter().collect();
    let r2l: Vec<&PacketRecord> = all.iter().copied().filter(|p| p.direction == Direction::RemoteToLocal).collect();
    let l2r: Vec<&PacketRecord> = all.iter().copied().filter(|p| p.direction == Direction::LocalToRemote).collect();
    let frames = |g: &[&PacketRecord]| g.iter().map(|p| f64::from(p.frame_len)).collect::<Vec<_>>();
    let payloads = |g: &[&PacketRecord]| g.iter().map(|p| f64::from(p.payload_len)).collect::<Vec<_>>();

    let mut out = Vec::with_capacity(STAT_FEATURE_COUNT);
    for group in [&r2l, &l2r, &all] {
        let s = summarize(&frames(group));
        out.extend([s.count, s.p25, s.p50, s.p75, s.max, s.mean, s.var]);
    }
    for group in [&r2l, &l2r, &all] {
        let s = summarize(&inter_arrivals(group));
        out.extend([s.p25, s.p50, s.p75]);
    }
    for group in [&r2l, &l2r] {
        let s = summarize(&payloads(group));
        out.extend([s.p25, s.p50, s.p75, s.max, s.mean, s.var]);
    }
    debug_assert_eq!(out.len(), STAT_FEATURE_COUNT);
    StatFeatureVector(out)
}

/// `[0, ln(t1 - t0 + ε), ln(t2 - t1 + ε), ...]` for timestamps in seconds.
pub fn iat_log(timestamps: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(timestamps.len());
    for (i, t) in timestamps.iter().enumerate() {
        if i == 0 {
            out.push(0.0);
            continue;
        }
        let dt = t - timestamps[i - 1];
        if dt < 0.0 {
            return Err(Error::DecreasingTimestamps { index: i });
        }
        out.push((dt + IAT_EPSILON).ln());
    }
    Ok(out)
}

/// First `n` packets of a flow as pre-padded channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub packet_size: Vec<f64>,
    pub payload_size: Vec<f64>,
    pub iat_log: Vec<f64>,
    /// +1 local→remote, −1 remote→local, 0 padding.
    pub direction: Vec<i8>,
}

/// Channels available to the sequence models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    PacketSize,
    PayloadSize,
    IatLog,
    Direction,
}

impl SequenceSample {
    pub fn len(&self) -> usize {
        self.packet_size.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packet_size.is_empty()
    }

    /// Number of leading padding positions.
    pub fn padding(&self) -> usize {
        self.direction.iter().take_while(|d| **d == 0).count()
    }

    pub fn channel(&self, c: Channel) -> Vec<f64> {
        match c {
            Channel::PacketSize => self.packet_size.clone(),
            Channel::PayloadSize => self.payload_size.clone(),
            Channel::IatLog => self.iat_log.clone(),
            Channel::Direction => self.direction.iter().map(|d| f64::from(*d)).collect(),
        }
    }

    /// Time-major `[t][channel]` values for the chosen channels.
    pub fn interleave(&self, channels: &[Channel]) -> Vec<f64> {
        let cols: Vec<Vec<f64>> = channels.iter().map(|c| self.channel(*c)).collect();
        let mut out = Vec::with_capacity(self.len() * channels.len());
        for t in 0..self.len() {
            out.extend(cols.iter().map(|col| col[t]));
        }
        out
    }
}

/// Takes the first `min(n, len)` packets in time order and right-aligns them
/// in length-`n` channels, zero-filling the front.
pub fn sequence_features(flow: &Flow, n: usize) -> Result<SequenceSample> {
    if flow.packets.is_empty() {
        return Err(Error::Empty("flow has no packets".into()));
    }
    if n == 0 {
        return Err(Error::Invalid("sequence length must be at least 1".into()));
    }
    let taken = &flow.packets[..flow.packets.len().min(n)];
    let pad = n - taken.len();
    let mut s = SequenceSample {
        packet_size: vec![0.0; n],
        payload_size: vec![0.0; n],
        iat_log: vec![0.0; n],
        direction: vec![0; n],
    };
    for (i, p) in taken.iter().enumerate() {
        let t = pad + i;
        s.packet_size[t] = f64::from(p.frame_len);
        s.payload_size[t] = f64::from(p.payload_len);
        s.direction[t] = p.direction.sign();
        if i > 0 {
            let prev = taken[i - 1].timestamp_us;
            let dt = p.timestamp_us.checked_sub(prev).ok_or(Error::DecreasingTimestamps { index: i })?;
            s.iat_log[t] = (dt as f64 / 1e6 + IAT_EPSILON).ln();
        }
    }
    Ok(s)
}
