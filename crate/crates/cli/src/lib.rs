//! Configuration parsing, IDX dataset ingestion, result writers and the
//! command implementations behind the `fedowen` binary.

pub mod commands;
pub mod config;
pub mod idx;
pub mod output;
