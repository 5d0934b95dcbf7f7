//! Library half of the `fednids` experiment runner: configuration parsing,
//! the end-to-end pipeline, and the emitted artifact formats (round table,
//! final report, manifest, model checkpoint).

pub mod checkpoint;
pub mod config;
pub mod manifest;
pub mod report;
pub mod runner;
