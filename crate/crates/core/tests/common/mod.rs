//! Test-side capture encoder, written against the on-disk layouts directly
//! so the library's own writer is never used to check its reader.
#![allow(dead_code)]

pub mod oracle;

use std::net::Ipv4Addr;

pub struct Frame {
    pub ts_sec: u32,
    pub ts_usec: u32,
    pub bytes: Vec<u8>,
    /// Overrides the record's original length when set.
    pub orig_len: Option<u32>,
}

pub fn ethernet(ethertype: u16, body: &[u8]) -> Vec<u8> {
    let mut f = vec![0x02, 0, 0, 0, 0, 0x01, 0x02, 0, 0, 0, 0, 0x02];
    f.extend_from_slice(&ethertype.to_be_bytes());
    f.extend_from_slice(body);
    f
}

pub fn ipv4(proto: u8, src: Ipv4Addr, dst: Ipv4Addr, l4: &[u8]) -> Vec<u8> {
    let total = (20 + l4.len()) as u16;
    let mut h = vec![0x45, 0x00];
    h.extend_from_slice(&total.to_be_bytes());
    h.extend_from_slice(&[0x12, 0x34, 0x40, 0x00, 64, proto, 0, 0]);
    h.extend_from_slice(&src.octets());
    h.extend_from_slice(&dst.octets());
    h.extend_from_slice(l4);
    h
}

pub fn tcp(sport: u16, dport: u16, payload: &[u8]) -> Vec<u8> {
    let mut t = Vec::new();
    t.extend_from_slice(&sport.to_be_bytes());
    t.extend_from_slice(&dport.to_be_bytes());
    t.extend_from_slice(&[0, 0, 0, 1, 0, 0, 0, 0, 0x50, 0x18, 0xff, 0xff, 0, 0, 0, 0]);
    t.extend_from_slice(payload);
    t
}

pub fn udp(sport: u16, dport: u16, payload: &[u8]) -> Vec<u8> {
    let mut u = Vec::new();
    u.extend_from_slice(&sport.to_be_bytes());
    u.extend_from_slice(&dport.to_be_bytes());
    u.extend_from_slice(&((8 + payload.len()) as u16).to_be_bytes());
    u.extend_from_slice(&[0, 0]);
    u.extend_from_slice(payload);
    u
}

pub fn tcp_frame(src: (Ipv4Addr, u16), dst: (Ipv4Addr, u16), payload: &[u8]) -> Vec<u8> {
    ethernet(0x0800, &ipv4(6, src.0, dst.0, &tcp(src.1, dst.1, payload)))
}

pub fn pcap(frames: &[Frame], big_endian: bool, link_type: u32) -> Vec<u8> {
    let w32 =
        |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&if big_endian { v.to_be_bytes() } else { v.to_le_bytes() });
    let w16 =
        |out: &mut Vec<u8>, v: u16| out.extend_from_slice(&if big_endian { v.to_be_bytes() } else { v.to_le_bytes() });
    let mut out = Vec::new();
    w32(&mut out, 0xa1b2c3d4);
    w16(&mut out, 2);
    w16(&mut out, 4);
    w32(&mut out, 0);
    w32(&mut out, 0);
    w32(&mut out, 65535);
    w32(&mut out, link_type);
    for f in frames {
        w32(&mut out, f.ts_sec);
        w32(&mut out, f.ts_usec);
        w32(&mut out, f.bytes.len() as u32);
        w32(&mut out, f.orig_len.unwrap_or(f.bytes.len() as u32));
        out.extend_from_slice(&f.bytes);
    }
    out
}

/// Hand-laid ClientHello record; independent of the library builder.
pub fn client_hello(sni: Option<&str>) -> Vec<u8> {
    let mut body = vec![0x03, 0x03];
    body.extend_from_slice(&[0xab; 32]);
    body.extend_from_slice(&[0x04, 1, 2, 3, 4]); // session id
    body.extend_from_slice(&[0x00, 0x02, 0x13, 0x01]); // one suite
    body.extend_from_slice(&[0x01, 0x00]);
    if let Some(name) = sni {
        let n = name.len() as u16;
        let mut ext = Vec::new();
        // a leading unrelated extension (supported_groups)
        ext.extend_from_slice(&[0x00, 0x0a, 0x00, 0x04, 0x00, 0x02, 0x00, 0x1d]);
        ext.extend_from_slice(&[0x00, 0x00]);
        ext.extend_from_slice(&(n + 5).to_be_bytes());
        ext.extend_from_slice(&(n + 3).to_be_bytes());
        ext.push(0);
        ext.extend_from_slice(&n.to_be_bytes());
        ext.extend_from_slice(name.as_bytes());
        body.extend_from_slice(&(ext.len() as u16).to_be_bytes());
        body.extend_from_slice(&ext);
    }
    let mut hs = vec![0x01, 0, (body.len() >> 8) as u8, body.len() as u8];
    hs.extend_from_slice(&body);
    let mut rec = vec![0x16, 0x03, 0x01, (hs.len() >> 8) as u8, hs.len() as u8];
    rec.extend_from_slice(&hs);
    rec
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sniforge_core::ingest::{Direction, Flow, FlowKey, PacketRecord};
use std::net::SocketAddrV4;

/// Random flow with realistic epoch timestamps, repeated timestamps, and
/// occasionally a single direction.
pub fn random_flow(seed: u64) -> Flow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..60);
    let one_sided = rng.random_bool(0.15);
    let mut ts: u64 = 1_460_000_000_000_000 + rng.random_range(0..1_000_000_000);
    let key = FlowKey::new(
        SocketAddrV4::new(Ipv4Addr::new(10, 0, 0, rng.random()), rng.random()),
        SocketAddrV4::new(Ipv4Addr::new(93, 1, 2, 3), 443),
    );
    let mut flow = Flow::new(key, Some("svc.example.com".into()));
    for _ in 0..n {
        if !rng.random_bool(0.1) {
            ts += rng.random_range(0..3_000_000);
        }
        let frame_len = rng.random_range(54..1515);
        let direction =
            if one_sided || rng.random_bool(0.5) { Direction::LocalToRemote } else { Direction::RemoteToLocal };
        flow.push(PacketRecord { timestamp_us: ts, frame_len, payload_len: frame_len - 54, direction });
    }
    flow
}
