//! Experiment orchestration for aggregate-feedback policy optimization:
//! configuration, learner-versus-adversary runs with exact regret, K sweeps
//! with log-log slope fits, and CSV/JSON records.

pub mod config;
pub mod error;
pub mod records;
pub mod runner;
pub mod sweep;

pub use config::{Algorithm, Experiment, ExperimentConfig};
pub use error::{Error, Result};
pub use records::{EpisodeRecord, RunSummary};
pub use runner::{run_experiment, run_seed, RunResult, SeedRun};
pub use sweep::{fit_log_log, sweep_scaling, SlopeFit, SweepReport};
