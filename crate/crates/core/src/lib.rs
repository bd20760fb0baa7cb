//! Worst-case tail risk under Wasserstein and φ-divergence ambiguity, with
//! EVT-calibrated nominal models.

pub mod divergences;
pub mod error;
pub mod evt;
pub mod harness;
pub mod network;
pub mod nominal;
pub mod quadrature;
pub mod rng;
pub mod robust_eval;
pub mod special;
pub mod tail_models;

pub use error::{Error, Result};
