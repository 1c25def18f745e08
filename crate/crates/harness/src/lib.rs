//! Monte-Carlo experiments around the `miso-precoding` crate: parameter
//! sweeps, before/after comparisons, power-allocation and runtime reports,
//! high-SNR slope fits, and CSV / plot-data output.

pub mod config;
pub mod output;
pub mod report;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{db_to_linear, parse_covariance, Algorithm, ConfigError, ExperimentSpec};
pub use output::{emit_plot_data, plot_data, read_records, read_results, write_records, write_results};
pub use report::{
    before_after_report, high_snr_slope, mean_stderr, power_allocation_report, runtime_benchmark, BeforeAfter, BenchRow, PowerAllocation,
};
pub use sweep::{run_sweep, SweepRecord};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] miso_precoding::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Report(String),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
