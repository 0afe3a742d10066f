//! Experiment harness behind the `hte` binary.
//!
//! Each experiment reads a JSON config (every field optional), writes
//! `results.csv` (one row per scored fit), `summary.csv` (means and standard
//! deviations over replications) and a `manifest.json` that reproduces the
//! run when passed back through `--config`.

pub mod app;
pub mod config;
pub mod experiments;
pub mod output;
