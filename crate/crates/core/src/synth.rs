//! Synthetic labeled traffic: per-class flow generators and a classic-pcap
//! writer whose output ingests back to the same flows.

use std::net::{Ipv4Addr, SocketAddrV4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    client_hello_record, Direction, Flow, FlowKey, LocalNets, PacketRecord, LINKTYPE_ETHERNET, PCAP_MAGIC,
};

/// Ethernet + IPv4 + TCP header bytes of every synthetic frame.
pub const HEADER_BYTES: u32 = 54;
pub const MAX_FRAME: u32 = 1514;
/// 2016-04-07T03:33:20Z, start of the synthetic capture.
pub const BASE_TIMESTAMP_US: u64 = 1_460_000_000_000_000;
/// Gap between consecutive flow starts.
const FLOW_SPACING_US: u64 = 250_000;

/// Traffic signature of one service.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    /// SNI hostname sent in the ClientHello (cleaned on ingest).
    pub label: String,
    /// Frame sizes are uniform on `mean ± spread`, clamped to [54, 1514].
    pub packet_size_mean: f64,
    pub packet_size_spread: f64,
    /// Fraction of the post-header bytes that is TCP payload; the rest is
    /// link-layer trailer.
    pub payload_ratio: f64,
    /// Inter-arrival seconds are log-normal with these parameters.
    pub iat_log_mean: f64,
    pub iat_log_sigma: f64,
    /// Packets per flow, uniform on the inclusive range.
    pub flow_len_min: usize,
    pub flow_len_max: usize,
    /// Probability that a data packet goes local→remote.
    pub outbound_prob: f64,
    pub seed: u64,
}

impl ClassProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("profile `{}`: {m}", self.label)));
        if self.label.is_empty() {
            return bad("empty label");
        }
        if !(self.packet_size_mean.is_finite() && self.packet_size_mean > 0.0) {
            return bad("packet_size_mean must be positive");
        }
        if !(self.packet_size_spread.is_finite() && self.packet_size_spread >= 0.0) {
            return bad("packet_size_spread must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.payload_ratio) {
            return bad("payload_ratio must be in [0, 1]");
        }
        if !self.iat_log_mean.is_finite() || !(self.iat_log_sigma.is_finite() && self.iat_log_sigma >= 0.0) {
            return bad("inter-arrival parameters must be finite with sigma >= 0");
        }
        if self.flow_len_min < 2 || self.flow_len_max < self.flow_len_min {
            return bad("flow length range must satisfy 2 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.outbound_prob) {
            return bad("outbound_prob must be in [0, 1]");
        }
        Ok(())
    }
}

/// Profiles plus corpus size, as stored in a JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub flows_per_class: usize,
    pub profiles: Vec<ClassProfile>,
}

const NAMES: [&str; 26] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliett", "kilo", "lima",
    "mike", "november", "oscar", "papa", "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey", "xray",
    "yankee", "zulu",
];

/// Hostname for class `i`; distinct classes stay distinct after cleaning.
/// Every third one carries digits and a hyphen that cleaning removes.
pub fn class_hostname(i: usize) -> String {
    let mut word = NAMES[i % 26].to_owned();
    let mut rest = i / 26;
    while rest > 0 {
        word.push(char::from(b'a' + ((rest - 1) % 26) as u8));
        rest = (rest - 1) / 26;
    }
    if i % 3 == 2 {
        format!("cdn-{}.{word}.example.net", i + 1)
    } else {
        format!("www.{word}.example.com")
    }
}

/// `n` classes with disjoint frame-size ranges and distinct timing, so
/// every feature family separates them.
pub fn separable_profiles(n: usize, seed: u64) -> Vec<ClassProfile> {
    let width = (1400.0 / n.max(1) as f64).min(300.0);
    (0..n)
        .map(|i| ClassProfile {
            label: class_hostname(i),
            packet_size_mean: 90.0 + width * (i as f64 + 0.5),
            packet_size_spread: width * 0.35,
            payload_ratio: 0.3 + 0.6 * (i as f64 + 0.5) / n as f64,
            iat_log_mean: -6.0 + 5.0 * i as f64 / n.max(2).saturating_sub(1).max(1) as f64,
            iat_log_sigma: 0.4,
            flow_len_min: 8,
            flow_len_max: 40,
            outbound_prob: 0.2 + 0.6 * i as f64 / n as f64,
            seed: seed.wrapping_add(i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
        })
        .collect()
}

fn client_endpoint(flow_index: usize) -> SocketAddrV4 {
    let port = 1024 + (flow_index % 60_000) as u16;
    let host = flow_index / 60_000;
    SocketAddrV4::new(Ipv4Addr::new(10, (host >> 16) as u8, (host >> 8) as u8, host as u8 | 1), port)
}

fn server_endpoint(class: usize) -> SocketAddrV4 {
    // 198.18.0.0/15 is reserved for benchmarking and never local
    SocketAddrV4::new(Ipv4Addr::new(198, 18 + (class >> 16) as u8 % 2, (class >> 8) as u8, class as u8), 443)
}

fn data_packet(p: &ClassProfile, rng: &mut ChaCha8Rng, direction: Direction, timestamp_us: u64) -> PacketRecord {
    let lo = (p.packet_size_mean - p.packet_size_spread).max(f64::from(HEADER_BYTES));
    let hi = (p.packet_size_mean + p.packet_size_spread).min(f64::from(MAX_FRAME)).max(lo);
    let frame_len = rng.random_range(lo..=hi).round() as u32;
    let payload_len = (f64::from(frame_len - HEADER_BYTES) * p.payload_ratio).floor() as u32;
    PacketRecord { timestamp_us, frame_len, payload_len, direction }
}

fn class_flows(class: usize, p: &ClassProfile, flows_per_class: usize) -> Result<Vec<Flow>> {
    p.validate()?;
    let hello_len = client_hello_record(&p.label).len() as u32;
    let iat = LogNormal::new(p.iat_log_mean, p.iat_log_sigma).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut flows = Vec::with_capacity(flows_per_class);
    for i in 0..flows_per_class {
        let flow_index = class * flows_per_class + i;
        let client = client_endpoint(flow_index);
        let mut flow = Flow::new(FlowKey::new(client, server_endpoint(class)), Some(p.label.clone()));
        let mut ts = BASE_TIMESTAMP_US + flow_index as u64 * FLOW_SPACING_US;
        flow.push(PacketRecord {
            timestamp_us: ts,
            frame_len: HEADER_BYTES + hello_len,
            payload_len: hello_len,
            direction: Direction::LocalToRemote,
        });
        let len = rng.random_range(p.flow_len_min..=p.flow_len_max);
        for k in 1..len {
            ts += (iat.sample(&mut rng) * 1e6).round() as u64;
            let direction = if k == 1 || !rng.random_bool(p.outbound_prob) {
                Direction::RemoteToLocal
            } else {
                Direction::LocalToRemote
            };
            flow.push(data_packet(p, &mut rng, direction, ts));
        }
        flows.push(flow);
    }
    Ok(flows)
}

/// `flows_per_class` flows per profile, class-major. Each profile draws from
/// its own seeded stream, so profiles generate in parallel.
///
/// Every flow opens with a local→remote ClientHello carrying the profile
/// label as SNI, followed by a remote→local reply and data packets. Flow
/// `sni` holds the raw label.
pub fn generate_flows(profiles: &[ClassProfile], flows_per_class: usize) -> Result<Vec<Flow>> {
    if profiles.is_empty() {
        return Err(Error::Empty("no class profiles".into()));
    }
    let per_class =
        profiles.par_iter().enumerate().map(|(c, p)| class_flows(c, p, flows_per_class)).collect::<Result<Vec<_>>>()?;
    Ok(per_class.into_iter().flatten().collect())
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header.chunks(2).map(|w| u32::from(u16::from_be_bytes([w[0], w[1]]))).sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

fn frame(src: SocketAddrV4, dst: SocketAddrV4, seq: u32, payload: &[u8], frame_len: usize) -> Vec<u8> {
    let mut f = Vec::with_capacity(frame_len);
    f.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01, 0x08, 0x00]);
    let ip_start = f.len();
    f.extend_from_slice(&[0x45, 0]);
    f.extend_from_slice(&((40 + payload.len()) as u16).to_be_bytes());
    f.extend_from_slice(&[0, 0, 0x40, 0, 64, 6, 0, 0]);
    f.extend_from_slice(&src.ip().octets());
    f.extend_from_slice(&dst.ip().octets());
    let csum = ipv4_checksum(&f[ip_start..ip_start + 20]);
    f[ip_start + 10..ip_start + 12].copy_from_slice(&csum.to_be_bytes());
    f.extend_from_slice(&src.port().to_be_bytes());
    f.extend_from_slice(&dst.port().to_be_bytes());
    f.extend_from_slice(&seq.to_be_bytes());
    f.extend_from_slice(&[0, 0, 0, 0, 0x50, 0x18, 0xfa, 0xf0, 0, 0, 0, 0]);
    f.extend_from_slice(payload);
    f.resize(frame_len, 0);
    f
}

/// Serializes flows as a classic little-endian pcap with Ethernet/IPv4/TCP
/// frames, records ordered by timestamp (flow order breaks ties).
///
/// Each flow's first packet must be local→remote and big enough for a
/// ClientHello carrying `sni`; exactly one endpoint must be in `nets`.
pub fn emit_pcap(flows: &[Flow], nets: &LocalNets) -> Result<Vec<u8>> {
    struct Rec {
        ts: u64,
        frame: Vec<u8>,
        orig_len: u32,
    }
    let mut recs = Vec::new();
    for (fi, flow) in flows.iter().enumerate() {
        let bad = |m: String| Error::Invalid(format!("flow {fi}: {m}"));
        let (local, remote) = match (nets.is_local(*flow.key.a.ip()), nets.is_local(*flow.key.b.ip())) {
            (true, false) => (flow.key.a, flow.key.b),
            (false, true) => (flow.key.b, flow.key.a),
            _ => return Err(bad("exactly one endpoint must be local".into())),
        };
        let sni = flow.sni.as_deref().ok_or_else(|| bad("no SNI label".into()))?;
        let hello = client_hello_record(sni);
        let mut seq = [1u32, 1u32];
        for (pi, p) in flow.packets.iter().enumerate() {
            if p.frame_len < HEADER_BYTES + p.payload_len {
                return Err(bad(format!("packet {pi}: frame_len {} < headers + payload", p.frame_len)));
            }
            let mut payload = vec![0u8; p.payload_len as usize];
            if pi == 0 {
                if p.direction != Direction::LocalToRemote || payload.len() < hello.len() {
                    return Err(bad("first packet cannot carry the ClientHello".into()));
                }
                payload[..hello.len()].copy_from_slice(&hello);
            } else if let Some(first) = payload.first_mut() {
                *first = 0x17;
            }
            let (src, dst, s) = match p.direction {
                Direction::LocalToRemote => (local, remote, &mut seq[0]),
                Direction::RemoteToLocal => (remote, local, &mut seq[1]),
            };
            let bytes = frame(src, dst, *s, &payload, p.frame_len as usize);
            *s = s.wrapping_add(p.payload_len);
            recs.push(Rec { ts: p.timestamp_us, frame: bytes, orig_len: p.frame_len });
        }
    }
    // stable: equal timestamps keep flow-then-packet order
    recs.sort_by_key(|r| r.ts);

    let mut out = Vec::new();
    out.extend_from_slice(&PCAP_MAGIC.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&65_535u32.to_le_bytes());
    out.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
    for r in recs {
        let secs = u32::try_from(r.ts / 1_000_000).map_err(|_| Error::Invalid("timestamp beyond 2106".into()))?;
        out.extend_from_slice(&secs.to_le_bytes());
        out.extend_from_slice(&((r.ts % 1_000_000) as u32).to_le_bytes());
        out.extend_from_slice(&(r.frame.len() as u32).to_le_bytes());
        out.extend_from_slice(&r.orig_len.to_le_bytes());
        out.extend_from_slice(&r.frame);
    }
    Ok(out)
}
