//! Scenario runner for sub-Riemannian Gauss–Bonnet limit experiments.
//!
//! The library side of the `gblim` binary: scenario files in, run reports
//! and plot-ready artifacts out. See [`scenario`] for the input schema,
//! [`runner`] for stage execution, and [`report`] for the artifact layout.

pub mod errors;
pub mod report;
pub mod runner;
pub mod scenario;

pub use errors::CliError;
pub use report::{emit, fmt17, RunReport};
pub use runner::{run, StageSet};
pub use scenario::{load_scenario, Scenario};
