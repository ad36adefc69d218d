//! Leading `#`-comment metadata line shared by the text artifacts
//! (flow files and dataset CSVs).

use std::io::Write;

use crate::error::Result;

pub const META_PREFIX: &str = "# sniforge ";

pub fn write_meta_line<W: Write>(out: &mut W, meta: &serde_json::Value) -> Result<()> {
    out.write_all(META_PREFIX.as_bytes())?;
    serde_json::to_writer(&mut *out, meta)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Splits an optional metadata line off the front of `text`.
pub fn split_meta(text: &str) -> Result<(Option<serde_json::Value>, &str)> {
    match text.strip_prefix(META_PREFIX) {
        Some(rest) => {
            let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
            Ok((Some(serde_json::from_str(line)?), body))
        }
        None => Ok((None, text)),
    }
}
