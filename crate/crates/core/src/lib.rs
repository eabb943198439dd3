//! Monostatic OFDM positioning: CSI simulation with angle-dependent array
//! impairments, MUSIC baselines, a small self-attention regressor trained per
//! angular region, and an RMSE/CDF evaluation harness.

pub mod bench;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod nn;
pub mod seed;
pub mod signal;
pub mod subspace;

pub use error::{Error, Result};
