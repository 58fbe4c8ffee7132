//! Delimited-text input and output.

mod config;
mod ingest;
pub mod report;

pub use config::{parse_weights, read_weights, ConfigFile};
pub use ingest::{delimiter_for_path, ingest, ingest_bytes, write_dataset, ColumnMap, IngestSpec};
pub use report::ReportTable;
