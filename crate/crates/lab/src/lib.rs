//! Experiment runner for `rmt-lab-core`: configuration, parallel execution,
//! output files, the spectrum cache and the `rmt-lab` command line.

pub mod cache;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
pub mod pool;
pub mod report;
pub mod run;
