//! Quantum federated learning simulator.
//!
//! Devices train variational quantum classifiers on local data shards; a
//! server broadcasts a global parameter vector each round and replaces it with
//! the average of the returned device parameters.

pub mod bench;
pub mod datasets;
pub mod encoding;
pub mod error;
pub mod federation;
pub mod qstate;
pub mod seed;
pub mod vqc;

pub use error::{Error, Result};
