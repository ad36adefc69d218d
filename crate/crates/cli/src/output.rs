//! Run configuration records and all-or-nothing output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use tempfile::NamedTempFile;

/// Embedded in every artifact. Inputs are recorded by file name only and
/// output paths not at all, so identical runs into different directories
/// produce identical bytes.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub params: serde_json::Value,
}

impl RunConfig {
    pub fn new(subcommand: &'static str, seed: u64, inputs: &[&Path], params: impl Serialize) -> Result<Self> {
        Ok(RunConfig {
            tool: "sniforge",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed,
            inputs: inputs.iter().map(|p| file_name(p)).collect(),
            params: serde_json::to_value(params)?,
        })
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }
}

pub fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn check_input(p: &Path) -> Result<()> {
    let meta = fs::metadata(p).with_context(|| format!("input {}", p.display()))?;
    if !meta.is_file() {
        bail!("input {} is not a regular file", p.display());
    }
    Ok(())
}

fn parent_dir(p: &Path) -> &Path {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    }
}

pub fn check_output(p: &Path) -> Result<()> {
    let dir = parent_dir(p);
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    if p.is_dir() {
        bail!("output {} is a directory", p.display());
    }
    Ok(())
}

/// Output directory that may not exist yet; its parent must.
pub fn check_output_dir(p: &Path) -> Result<()> {
    if p.exists() && !p.is_dir() {
        bail!("{} exists and is not a directory", p.display());
    }
    if !p.exists() {
        check_output(p)?;
    }
    Ok(())
}

/// Collects outputs in temporary files next to their targets and renames
/// them into place only once every one has been written. Dropping without
/// `commit` removes the temporaries.
#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn add(&mut self, path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let dir = parent_dir(path);
        let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("temporary file in {}", dir.display()))?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            write(&mut w).with_context(|| format!("writing {}", path.display()))?;
            w.flush()?;
        }
        self.files.push((tmp, path.to_owned()));
        Ok(())
    }

    pub fn commit(self) -> Result<()> {
        for (tmp, path) in self.files {
            // temporaries are created owner-only
            #[cfg(unix)]
            {
                use std::os::unix::fs::PermissionsExt;
                tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
            }
            tmp.as_file().sync_all()?;
            tmp.persist(&path).with_context(|| format!("renaming into {}", path.display()))?;
        }
        Ok(())
    }
}

/// Prefixes CSV bodies with the `# sniforge {...}` metadata line.
pub fn with_meta(
    run: &serde_json::Value,
    body: impl FnOnce(&mut dyn Write) -> sniforge_core::Result<()>,
) -> impl FnOnce(&mut dyn Write) -> Result<()> {
    let run = run.clone();
    move |mut w: &mut dyn Write| {
        sniforge_core::meta::write_meta_line(&mut w, &serde_json::json!({ "run": run }))?;
        body(w)?;
        Ok(())
    }
}

/// One JSON document on stdout.
pub fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
