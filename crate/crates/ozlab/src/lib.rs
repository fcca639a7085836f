//! Experiment driver: configuration, pipeline stages, verification suites
//! and output bookkeeping for the `ozlab` command.

pub mod config;
pub mod output;
pub mod report;
pub mod stages;
pub mod suites;
