//! Model file format: one JSON header line followed by the flat state as
//! little-endian `f64` values.
//!
//! ```text
//! {"format":"sniforge-network","version":1,"spec":{...},"state_len":N,"meta":{...}}\n
//! <N x 8 bytes>
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::network::Network;
use crate::spec::ModelSpec;

pub const FORMAT: &str = "sniforge-network";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    spec: ModelSpec,
    state_len: usize,
    #[serde(default)]
    meta: serde_json::Value,
}

pub fn write_network<W: Write>(net: &Network, meta: serde_json::Value, mut out: W) -> Result<()> {
    let state = net.state();
    let header =
        Header { format: FORMAT.into(), version: VERSION, spec: net.spec().clone(), state_len: state.len(), meta };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for v in state {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a network and the free-form metadata stored with it.
pub fn read_network<R: BufRead>(mut input: R) -> Result<(Network, serde_json::Value)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())?;
    if header.format != FORMAT {
        return Err(NnError::Artifact(format!("unknown format `{}`", header.format)));
    }
    if header.version != VERSION {
        return Err(NnError::Artifact(format!("unsupported version {}", header.version)));
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != header.state_len * 8 {
        return Err(NnError::Artifact(format!("expected {} state bytes, found {}", header.state_len * 8, bytes.len())));
    }
    let state: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let mut net = Network::new(header.spec, 0)?;
    net.load_state(&state)?;
    Ok((net, header.meta))
}
