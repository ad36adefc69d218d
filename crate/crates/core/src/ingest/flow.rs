use std::collections::HashMap;
use std::fmt;
use std::net::{Ipv4Addr, SocketAddrV4};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::label::clean_label;
use super::pcap::RawPacket;
use super::tls::extract_sni;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Client to server.
    LocalToRemote,
    /// Server to client.
    RemoteToLocal,
}

impl Direction {
    /// +1 for local→remote, −1 for remote→local.
    pub fn sign(self) -> i8 {
        match self {
            Direction::LocalToRemote => 1,
            Direction::RemoteToLocal => -1,
        }
    }

    pub fn from_sign(sign: i8) -> Option<Self> {
        match sign {
            1 => Some(Direction::LocalToRemote),
            -1 => Some(Direction::RemoteToLocal),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::LocalToRemote => Direction::RemoteToLocal,
            Direction::RemoteToLocal => Direction::LocalToRemote,
        }
    }
}

/// Direction-agnostic connection key; `a <= b` always.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub a: SocketAddrV4,
    pub b: SocketAddrV4,
}

impl FlowKey {
    pub fn new(x: SocketAddrV4, y: SocketAddrV4) -> Self {
        if x <= y {
            FlowKey { a: x, b: y }
        } else {
            FlowKey { a: y, b: x }
        }
    }

    pub fn of(packet: &RawPacket) -> Self {
        Self::new(packet.src, packet.dst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub timestamp_us: u64,
    pub frame_len: u32,
    pub payload_len: u32,
    pub direction: Direction,
}

impl PacketRecord {
    pub fn timestamp_secs(&self) -> f64 {
        self.timestamp_us as f64 / 1e6
    }
}

/// A unified bidirectional TCP connection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub key: FlowKey,
    /// Sorted by timestamp.
    pub packets: Vec<PacketRecord>,
    /// Cleaned SNI label.
    pub sni: Option<String>,
    /// Sum of `payload_len` over `packets`. Stored, not used as a feature.
    pub accumulated_bytes: u64,
}

impl Flow {
    pub fn new(key: FlowKey, sni: Option<String>) -> Self {
        Flow { key, packets: Vec::new(), sni, accumulated_bytes: 0 }
    }

    /// Appends a packet; callers keep timestamps non-decreasing.
    pub fn push(&mut self, record: PacketRecord) {
        self.accumulated_bytes += u64::from(record.payload_len);
        self.packets.push(record);
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Checks ordering and the byte total.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.packets.windows(2).position(|w| w[1].timestamp_us < w[0].timestamp_us) {
            return Err(Error::DecreasingTimestamps { index: i + 1 });
        }
        let total: u64 = self.packets.iter().map(|p| u64::from(p.payload_len)).sum();
        if total != self.accumulated_bytes {
            return Err(Error::Invalid(format!(
                "accumulated_bytes {} != payload total {total}",
                self.accumulated_bytes
            )));
        }
        Ok(())
    }

    /// Same flow with every packet's direction reversed.
    pub fn with_flipped_directions(&self) -> Flow {
        let mut out = self.clone();
        for p in &mut out.packets {
            p.direction = p.direction.flipped();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ipv4Cidr {
    pub addr: Ipv4Addr,
    pub prefix: u8,
}

impl Ipv4Cidr {
    pub fn new(addr: Ipv4Addr, prefix: u8) -> Result<Self> {
        if prefix > 32 {
            return Err(Error::Cidr(format!("{addr}/{prefix}")));
        }
        Ok(Ipv4Cidr { addr, prefix })
    }

    fn mask(&self) -> u32 {
        if self.prefix == 0 {
            0
        } else {
            u32::MAX << (32 - u32::from(self.prefix))
        }
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        (u32::from(ip) & self.mask()) == (u32::from(self.addr) & self.mask())
    }
}

impl FromStr for Ipv4Cidr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Cidr(s.to_owned());
        let (addr, prefix) = match s.split_once('/') {
            Some((a, p)) => (a, p.parse::<u8>().map_err(|_| bad())?),
            None => (s, 32),
        };
        let addr = addr.parse::<Ipv4Addr>().map_err(|_| bad())?;
        Ipv4Cidr::new(addr, prefix).map_err(|_| bad())
    }
}

impl fmt::Display for Ipv4Cidr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.prefix)
    }
}

/// Address ranges considered "local" (the capturing client side).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalNets(Vec<Ipv4Cidr>);

impl LocalNets {
    pub fn new(nets: Vec<Ipv4Cidr>) -> Result<Self> {
        if nets.is_empty() {
            return Err(Error::Invalid("local network list is empty".into()));
        }
        Ok(LocalNets(nets))
    }

    /// 10.0.0.0/8, 172.16.0.0/12, 192.168.0.0/16.
    pub fn rfc1918() -> Self {
        LocalNets(vec![
            Ipv4Cidr { addr: Ipv4Addr::new(10, 0, 0, 0), prefix: 8 },
            Ipv4Cidr { addr: Ipv4Addr::new(172, 16, 0, 0), prefix: 12 },
            Ipv4Cidr { addr: Ipv4Addr::new(192, 168, 0, 0), prefix: 16 },
        ])
    }

    pub fn nets(&self) -> &[Ipv4Cidr] {
        &self.0
    }

    pub fn is_local(&self, ip: Ipv4Addr) -> bool {
        self.0.iter().any(|n| n.contains(ip))
    }

    /// `None` when both or neither endpoint is local.
    pub fn direction(&self, src: Ipv4Addr, dst: Ipv4Addr) -> Option<Direction> {
        match (self.is_local(src), self.is_local(dst)) {
            (true, false) => Some(Direction::LocalToRemote),
            (false, true) => Some(Direction::RemoteToLocal),
            _ => None,
        }
    }
}

impl Default for LocalNets {
    fn default() -> Self {
        Self::rfc1918()
    }
}

/// Packet and flow bookkeeping from one assembly pass.
///
/// `tcp_packets == kept_packets + excluded_packets()`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub tcp_packets: usize,
    pub flows_seen: usize,
    pub flows_kept: usize,
    pub flows_dropped_unknown_sni: usize,
    pub flows_dropped_unlabelable: usize,
    pub kept_packets: usize,
    /// Packets with both or neither endpoint local.
    pub undecidable_packets: usize,
    /// Packets belonging to dropped flows.
    pub dropped_flow_packets: usize,
}

impl IngestSummary {
    pub fn excluded_packets(&self) -> usize {
        self.undecidable_packets + self.dropped_flow_packets
    }
}

#[derive(Clone, Debug, Default)]
pub struct Assembly {
    pub flows: Vec<Flow>,
    pub summary: IngestSummary,
}

struct Pending {
    flow: Flow,
    /// Set once the first ClientHello has been looked at.
    hello_seen: bool,
    raw_sni: Option<String>,
}

/// Groups packets into direction-unified flows labeled by the cleaned SNI
/// of the first ClientHello on each flow.
///
/// Flows come out in first-seen order; packets inside a flow are stably
/// sorted by timestamp. Flows without a usable SNI are dropped and counted.
pub fn assemble_flows(packets: &[RawPacket], nets: &LocalNets) -> Assembly {
    let mut summary = IngestSummary { tcp_packets: packets.len(), ..Default::default() };
    let mut index: HashMap<FlowKey, usize> = HashMap::new();
    let mut pending: Vec<Pending> = Vec::new();

    for p in packets {
        let Some(direction) = nets.direction(*p.src.ip(), *p.dst.ip()) else {
            summary.undecidable_packets += 1;
            continue;
        };
        let key = FlowKey::of(p);
        let slot = *index.entry(key).or_insert_with(|| {
            pending.push(Pending { flow: Flow::new(key, None), hello_seen: false, raw_sni: None });
            pending.len() - 1
        });
        let entry = &mut pending[slot];
        if p.is_tls_client_hello && !entry.hello_seen {
            entry.hello_seen = true;
            entry.raw_sni = extract_sni(&p.tcp_payload);
        }
        entry.flow.push(PacketRecord {
            timestamp_us: p.timestamp_us,
            frame_len: p.frame_len,
            payload_len: p.payload_len,
            direction,
        });
    }

    summary.flows_seen = pending.len();
    let mut flows = Vec::new();
    for Pending { mut flow, raw_sni, .. } in pending {
        let n = flow.packets.len();
        match raw_sni {
            None => {
                summary.flows_dropped_unknown_sni += 1;
                summary.dropped_flow_packets += n;
            }
            Some(raw) => match clean_label(&raw) {
                None => {
                    summary.flows_dropped_unlabelable += 1;
                    summary.dropped_flow_packets += n;
                }
                Some(label) => {
                    flow.sni = Some(label);
                    flow.packets.sort_by_key(|r| r.timestamp_us);
                    summary.kept_packets += n;
                    flows.push(flow);
                }
            },
        }
    }
    summary.flows_kept = flows.len();
    Assembly { flows, summary }
}
