//! Encrypted-traffic service identification: pcap ingestion and SNI
//! labeling, flow features, datasets, a random forest, ensembling, metrics,
//! the cross-validation experiment, and a synthetic corpus generator.

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod features;
pub mod forest;
pub mod ingest;
pub mod meta;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
