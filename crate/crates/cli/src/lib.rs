//! Configuration, output formats and run orchestration behind the `hho`
//! binary.

pub mod config;
pub mod output;
pub mod runner;

/// Environment variable holding the number of worker threads.
pub const THREADS_ENV: &str = "HHO_THREADS";
