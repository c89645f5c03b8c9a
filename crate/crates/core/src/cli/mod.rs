//! Command-line front end: configuration, CSV ingestion and run orchestration.

pub mod config;
pub mod ingest;
pub mod run;

use std::path::PathBuf;

pub use config::{Command, Estimator, RunConfig};
pub use ingest::{ingest_csv, parse_csv, IngestOptions};
pub use run::{manifest, run, RunArtifacts, MANIFEST_FILE, REPORT_FILE, RESULTS_FILE};

use crate::error::Result;

/// Command-line flags that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Loads the config named in `flags` (or the defaults) and applies the flags.
pub fn build_config(command: Command, flags: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(command);
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = flags.workers {
        cfg.workers = workers;
    }
    if let Some(out) = &flags.out {
        cfg.out.clone_from(out);
    }
    Ok(cfg)
}
