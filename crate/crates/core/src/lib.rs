//! Tail quantiles of per-class sojourn times in a non-preemptive multi-class
//! M/M/1 priority queue, estimated by regenerative simulation with a
//! switching importance-sampling measure tuned by the cross-entropy method.

pub mod ce;
pub mod engine;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod measure;
pub mod model;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
