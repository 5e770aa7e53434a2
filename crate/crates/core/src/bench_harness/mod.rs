//! Data generators, baselines, experiments and the benchmark runner.

pub mod benchmark;
pub mod config;
pub mod erm;
pub mod gap;
pub mod generators;
pub mod plots;

pub use benchmark::{run_benchmark, write_benchmark, BenchmarkRun, BenchmarkSummary, Testbed, TrialRecord};
pub use config::{ClassSpec, Constants, ExperimentConfig};
pub use erm::erm_baseline;
pub use gap::{run_gap_experiment, GapConfig, GapReport};
