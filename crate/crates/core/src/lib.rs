//! Multi-task implicit discourse relation recognition.
//!
//! A shared encoder feeds three classification heads, one per sense level,
//! trained on annotation distributions and evaluated both as distributions
//! (Jensen-Shannon distance) and as single labels (weighted F1).

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod distribution;
pub mod error;
pub mod hierarchy;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod prediction;
pub mod synthetic;
pub mod training;

pub use config::{ExperimentConfig, Setting};
pub use distribution::LabelDistribution;
pub use error::{Error, Result};
pub use hierarchy::{Level, Sense, SenseHierarchy};
pub use losses::LossKind;
pub use prediction::Prediction;

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
