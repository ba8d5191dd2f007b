//! Experiment harness for randomized robust subspace recovery: synthetic
//! instance generation, single end-to-end runs, Monte-Carlo
//! phase-transition grids over sketch sizes, sufficient-sample-size bound
//! evaluation, and randomized-vs-full-data timing comparisons. Everything
//! is exposed both as a library and through the `rrsr` command-line tool;
//! outputs are CSV and JSON for external plotting.

pub mod baseline;
pub mod cli;
pub mod config;
pub mod grid;

pub use baseline::{run_baseline_comparison, TimingRow, TimingTable};
pub use cli::cli_main;
pub use grid::{run_phase_transition, GridResult, GridSpec, InstanceParams};
