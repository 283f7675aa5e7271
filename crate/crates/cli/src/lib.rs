//! Library surface of the experiment runner: scenario file parsing and
//! result file formats, shared between the `timesync` binary and its tests.

pub mod config;
pub mod output;
