//! Hybrid quantum-classical traffic-sign classification.
//!
//! * [`qsim`]: dense state-vector simulator.
//! * [`quanv`]: quanvolution feature extraction and its binary cache.
//! * [`data`]: PPM decoding, preprocessing, manifests and splits.
//! * [`nn`]: a small CNN with backpropagation and Adam.
//! * [`metrics`]: confusion matrix and macro metrics.
//! * [`pipeline`]: the `prepare → quanv → train → eval → report` commands.
//! * [`synth`]: a synthetic stand-in for the traffic-sign image tree.

pub mod config;
pub mod data;
pub mod error;
pub mod hash;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod qsim;
pub mod quanv;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
