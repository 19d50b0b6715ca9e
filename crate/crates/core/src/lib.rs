//! Core algorithms for selecting unsupervised pipelines by dataset
//! similarity: encoding, FastICA embeddings, optimal-transport distances,
//! estimators, metrics, search, and evaluation statistics.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, timing and the
//! command-line front end live in the `lotus` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod estimators;
pub mod eval;
pub mod error;
pub mod ica;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod ot;
pub mod rng;
pub mod runtime;
pub mod search;
pub mod similarity;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use linalg::Matrix;
