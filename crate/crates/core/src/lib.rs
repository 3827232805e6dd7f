//! Blockwise QAOA-aware MIMO detection.
//!
//! The channel is reordered and factorized into a block upper-staircase
//! `R`, each block is turned into a small Gray-coded spin problem, and a
//! backward K-best search stitches local candidate lists together. Local
//! lists come from exhaustive enumeration, per-block QAOA training, or QAOA
//! with angles transferred from an SNR-indexed template bank.

pub mod baselines;
pub mod constellation;
pub mod detector;
pub mod error;
pub mod harness;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod preprocess;
pub mod qaoa;
pub mod transfer;

pub use constellation::Modulation;
pub use detector::{detect, Counters, Detection, DetectorConfig, SolverMode};
pub use error::{Error, Result};
pub use model::{generate_instance, DetectionInstance, RngStream};
