//! Line-oriented flow file.
//!
//! An optional `# sniforge {json}` metadata line, then CSV with header
//! [`FLOW_FILE_HEADER`] and one row per flow. The `packets` column holds
//! space-separated `timestamp_us:frame_len:payload_len:dir` entries with
//! `dir` = 1 (local→remote) or -1 (remote→local).

use std::io::{Read, Write};
use std::net::SocketAddrV4;

use super::flow::{Direction, Flow, FlowKey, PacketRecord};
use crate::error::{Error, Result};
use crate::meta::{split_meta, write_meta_line};

pub const FLOW_FILE_HEADER: [&str; 6] =
    ["sni", "endpoint_a", "endpoint_b", "accumulated_bytes", "packet_count", "packets"];

fn encode_packets(packets: &[PacketRecord]) -> String {
    let parts: Vec<String> = packets
        .iter()
        .map(|p| format!("{}:{}:{}:{}", p.timestamp_us, p.frame_len, p.payload_len, p.direction.sign()))
        .collect();
    parts.join(" ")
}

pub fn write_flows<W: Write>(flows: &[Flow], meta: Option<&serde_json::Value>, mut out: W) -> Result<()> {
    if let Some(meta) = meta {
        write_meta_line(&mut out, meta)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FLOW_FILE_HEADER)?;
    for f in flows {
        w.write_record([
            f.sni.clone().unwrap_or_default(),
            f.key.a.to_string(),
            f.key.b.to_string(),
            f.accumulated_bytes.to_string(),
            f.packets.len().to_string(),
            encode_packets(&f.packets),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_packet(s: &str) -> Option<PacketRecord> {
    let mut it = s.split(':');
    let rec = PacketRecord {
        timestamp_us: it.next()?.parse().ok()?,
        frame_len: it.next()?.parse().ok()?,
        payload_len: it.next()?.parse().ok()?,
        direction: Direction::from_sign(it.next()?.parse().ok()?)?,
    };
    it.next().is_none().then_some(rec)
}

/// Reads a flow file, returning its metadata line (if any) and the flows.
/// Every row is checked against the flow invariants.
pub fn read_flows<R: Read>(mut input: R) -> Result<(Option<serde_json::Value>, Vec<Flow>)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (meta, body) = split_meta(&text)?;
    let line_offset = usize::from(meta.is_some());

    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != FLOW_FILE_HEADER {
        return Err(Error::FlowFile { line: 1 + line_offset, message: format!("unexpected header {header:?}") });
    }
    let mut flows = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i + 2 + line_offset;
        let bad = |message: String| Error::FlowFile { line, message };
        if row.len() != FLOW_FILE_HEADER.len() {
            return Err(bad(format!("{} fields", row.len())));
        }
        let addr = |s: &str| s.parse::<SocketAddrV4>().map_err(|_| bad(format!("bad endpoint `{s}`")));
        let (a, b) = (addr(&row[1])?, addr(&row[2])?);
        if a > b {
            return Err(bad("endpoints not in canonical order".into()));
        }
        let accumulated_bytes: u64 = row[3].parse().map_err(|_| bad("bad accumulated_bytes".into()))?;
        let count: usize = row[4].parse().map_err(|_| bad("bad packet_count".into()))?;
        let packets = row[5]
            .split_ascii_whitespace()
            .map(|p| parse_packet(p).ok_or_else(|| bad(format!("bad packet `{p}`"))))
            .collect::<Result<Vec<_>>>()?;
        if packets.len() != count {
            return Err(bad(format!("packet_count {count} but {} packets", packets.len())));
        }
        let sni = (!row[0].is_empty()).then(|| row[0].to_owned());
        let flow = Flow { key: FlowKey { a, b }, packets, sni, accumulated_bytes };
        flow.validate().map_err(|e| bad(e.to_string()))?;
        flows.push(flow);
    }
    Ok((meta, flows))
}
