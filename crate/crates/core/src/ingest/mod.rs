//! Capture ingestion: classic pcap parsing, TLS ClientHello SNI extraction,
//! label cleaning, and assembly of direction-unified TCP flows.

mod flow;
mod flowfile;
mod label;
mod pcap;
mod tls;

pub use flow::{assemble_flows, Assembly, Direction, Flow, FlowKey, IngestSummary, Ipv4Cidr, LocalNets, PacketRecord};
pub use flowfile::{read_flows, write_flows, FLOW_FILE_HEADER};
pub use label::clean_label;
pub use pcap::{parse_capture, CaptureSummary, ParsedCapture, RawPacket, LINKTYPE_ETHERNET, PCAP_MAGIC};
pub use tls::{client_hello_record, extract_sni, is_client_hello};
