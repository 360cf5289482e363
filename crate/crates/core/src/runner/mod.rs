//! Configuration, data generation, persistence and orchestration of runs and suites.

pub mod config;
pub mod data;
pub mod report;
pub mod run;
pub mod snapshot;
pub mod suite;
pub mod tolerances;

pub use config::{parse_override, RunConfig};
pub use data::{generate_data, seed_record, SeedRecord};
pub use report::Check;
pub use run::{run, Manifest, RunOutcome, Status};
pub use snapshot::Snapshot;
pub use suite::{suite, SuiteName, SuiteReport, SUITES};

use crate::error::{Error, Result};

pub const WORKERS_ENV: &str = "MKG4D_WORKERS";

/// Sizes the global worker pool from `MKG4D_WORKERS`, if set. Results do
/// not depend on the worker count.
pub fn configure_workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => {
            let n: usize = raw
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} = `{raw}` is not a positive integer")))?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(n)
        }
        Err(_) => Ok(rayon::current_num_threads()),
    }
}
