//! Configuration-driven sweeps behind the `heom-dpt` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_str, Analysis, RunConfig};
pub use run::{read_results, run, ResultRow, RunSummary};
