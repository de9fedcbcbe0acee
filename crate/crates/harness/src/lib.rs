//! Experiment harness: configuration, initial data, the coupled ε-sweep,
//! the modulated-energy audit, verification suites and reports.

pub mod audit;
pub mod config;
pub mod init;
pub mod output;
pub mod report;
pub mod suites;
pub mod sweep;

pub use vfpns::fit::{fit_rate, RateFit};
