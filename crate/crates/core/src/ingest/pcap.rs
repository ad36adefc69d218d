//! Classic libpcap file reader (no pcapng).
//!
//! Layout: a 24-byte global header (magic, version, thiszone, sigfigs,
//! snaplen, link type) followed by records of a 16-byte header (ts_sec,
//! ts_usec, incl_len, orig_len) and `incl_len` captured bytes.

use std::net::{Ipv4Addr, SocketAddrV4};

use serde::{Deserialize, Serialize};

use super::tls::is_client_hello;
use crate::error::{Error, Result};

pub const PCAP_MAGIC: u32 = 0xa1b2_c3d4;
pub const LINKTYPE_ETHERNET: u32 = 1;

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const ETHERTYPE_VLAN: u16 = 0x8100;
const IPPROTO_TCP: u8 = 6;

/// One IPv4/TCP frame from a capture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawPacket {
    /// Microseconds since the epoch.
    pub timestamp_us: u64,
    /// Original length on the wire.
    pub frame_len: u32,
    pub src: SocketAddrV4,
    pub dst: SocketAddrV4,
    /// Captured TCP payload bytes (may be shorter than `payload_len` under snaplen).
    pub tcp_payload: Vec<u8>,
    /// TCP segment payload size from the IP and TCP header lengths.
    pub payload_len: u32,
    pub is_tls_client_hello: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureSummary {
    pub records: usize,
    pub tcp_packets: usize,
    pub skipped_non_ip: usize,
    pub skipped_ipv6: usize,
    pub skipped_non_tcp: usize,
    pub skipped_fragments: usize,
    pub skipped_malformed: usize,
    /// Incomplete trailing records; parsing stops at the first one.
    pub truncated_records: usize,
}

impl CaptureSummary {
    pub fn merge(&mut self, other: &CaptureSummary) {
        self.records += other.records;
        self.tcp_packets += other.tcp_packets;
        self.skipped_non_ip += other.skipped_non_ip;
        self.skipped_ipv6 += other.skipped_ipv6;
        self.skipped_non_tcp += other.skipped_non_tcp;
        self.skipped_fragments += other.skipped_fragments;
        self.skipped_malformed += other.skipped_malformed;
        self.truncated_records += other.truncated_records;
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParsedCapture {
    pub packets: Vec<RawPacket>,
    pub summary: CaptureSummary,
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self {
            Endian::Little => u32::from_le_bytes(a),
            Endian::Big => u32::from_be_bytes(a),
        }
    }
}

fn be16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

enum Frame {
    Tcp(RawPacket),
    NonIp,
    Ipv6,
    NonTcp,
    Fragment,
    Malformed,
}

fn decode_frame(data: &[u8], timestamp_us: u64, frame_len: u32) -> Frame {
    if data.len() < 14 {
        return Frame::Malformed;
    }
    let mut ethertype = be16(&data[12..14]);
    let mut offset = 14;
    while ethertype == ETHERTYPE_VLAN {
        if data.len() < offset + 4 {
            return Frame::Malformed;
        }
        ethertype = be16(&data[offset + 2..offset + 4]);
        offset += 4;
    }
    match ethertype {
        ETHERTYPE_IPV4 => {}
        ETHERTYPE_IPV6 => return Frame::Ipv6,
        _ => return Frame::NonIp,
    }
    let ip = &data[offset..];
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return Frame::Malformed;
    }
    let ihl = usize::from(ip[0] & 0x0f) * 4;
    let total_len = usize::from(be16(&ip[2..4]));
    if ihl < 20 || ip.len() < ihl || total_len < ihl {
        return Frame::Malformed;
    }
    if ip[9] != IPPROTO_TCP {
        return Frame::NonTcp;
    }
    if be16(&ip[6..8]) & 0x1fff != 0 {
        return Frame::Fragment;
    }
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    let tcp = &ip[ihl..];
    if tcp.len() < 20 {
        return Frame::Malformed;
    }
    let data_offset = usize::from(tcp[12] >> 4) * 4;
    if data_offset < 20 || total_len < ihl + data_offset || tcp.len() < data_offset {
        return Frame::Malformed;
    }
    let payload_len = total_len - ihl - data_offset;
    let captured_end = tcp.len().min(total_len - ihl);
    let tcp_payload = tcp[data_offset..captured_end.max(data_offset)].to_vec();
    let is_tls_client_hello = is_client_hello(&tcp_payload);
    Frame::Tcp(RawPacket {
        timestamp_us,
        frame_len,
        src: SocketAddrV4::new(src_ip, be16(&tcp[0..2])),
        dst: SocketAddrV4::new(dst_ip, be16(&tcp[2..4])),
        tcp_payload,
        payload_len: payload_len as u32,
        is_tls_client_hello,
    })
}

/// Parses a classic pcap byte stream into IPv4/TCP packets.
///
/// Non-IP, IPv6, and non-TCP frames are skipped and counted. A truncated
/// trailing record stops parsing and is reported in
/// [`CaptureSummary::truncated_records`]; a bad global header is fatal.
pub fn parse_capture(bytes: &[u8]) -> Result<ParsedCapture> {
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(Error::PcapHeader(format!("{} bytes, need {GLOBAL_HEADER_LEN}", bytes.len())));
    }
    let magic = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let endian = if magic == PCAP_MAGIC {
        Endian::Little
    } else if magic == PCAP_MAGIC.swap_bytes() {
        Endian::Big
    } else {
        return Err(Error::PcapHeader(format!("bad magic {magic:#010x}")));
    };
    let link_type = endian.u32(&bytes[20..24]);
    if link_type != LINKTYPE_ETHERNET {
        return Err(Error::LinkType(link_type));
    }

    let mut out = ParsedCapture::default();
    let mut pos = GLOBAL_HEADER_LEN;
    while pos < bytes.len() {
        if bytes.len() - pos < RECORD_HEADER_LEN {
            out.summary.truncated_records += 1;
            break;
        }
        let hdr = &bytes[pos..pos + RECORD_HEADER_LEN];
        let ts_sec = u64::from(endian.u32(&hdr[0..4]));
        let ts_usec = u64::from(endian.u32(&hdr[4..8]));
        let incl_len = endian.u32(&hdr[8..12]) as usize;
        let orig_len = endian.u32(&hdr[12..16]);
        let body_start = pos + RECORD_HEADER_LEN;
        if bytes.len() - body_start < incl_len {
            out.summary.truncated_records += 1;
            break;
        }
        out.summary.records += 1;
        let frame = &bytes[body_start..body_start + incl_len];
        pos = body_start + incl_len;
        if orig_len == 0 || (orig_len as usize) < incl_len {
            out.summary.skipped_malformed += 1;
            continue;
        }
        match decode_frame(frame, ts_sec * 1_000_000 + ts_usec, orig_len) {
            Frame::Tcp(p) => {
                out.summary.tcp_packets += 1;
                out.packets.push(p);
            }
            Frame::NonIp => out.summary.skipped_non_ip += 1,
            Frame::Ipv6 => out.summary.skipped_ipv6 += 1,
            Frame::NonTcp => out.summary.skipped_non_tcp += 1,
            Frame::Fragment => out.summary.skipped_fragments += 1,
            Frame::Malformed => out.summary.skipped_malformed += 1,
        }
    }
    Ok(out)
}
