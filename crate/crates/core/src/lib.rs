//! Surrogate-index imputation of long-term outcomes, doubly-robust
//! off-policy evaluation, policy learning by cost-sensitive classification,
//! and bootstrap Thompson sampling, with a synthetic data-generating process
//! that carries full potential-outcome ground truth.

pub mod data;
pub mod error;
pub mod explore;
pub mod learners;
pub mod ope;
pub mod policy;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod surrogate;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
