//! Batch front end for the orbit solver: job configs, orbit files, exports.

pub mod config;
pub mod export;
pub mod job;
pub mod orbit;

pub use config::{Command, ExportFormat, JobConfig};
pub use job::{run_config, run_job, Outcome, Status};
pub use orbit::OrbitFile;
