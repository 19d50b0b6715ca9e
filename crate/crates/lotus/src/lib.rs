//! File formats, persistence, reporting and parallel execution around
//! `lotus-core`, plus the `lotus` command-line tool.

pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod metastore;
pub mod report;

pub use error::{Error, Result};
pub use lotus_core;
