//! Configuration, trace files and reports.

pub mod config;
pub mod report;
pub mod trace_csv;
pub mod units;

pub use config::{AnalysisConfig, Config, DeviceConfig};
pub use report::{DeviceReport, Provenance, ReportBundle, REPORT_SCHEMA};
pub use trace_csv::{ingest_trace, parse_table, parse_trace, read_trace, write_table, write_trace};
