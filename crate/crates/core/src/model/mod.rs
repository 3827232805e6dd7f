//! System model: linear algebra, random streams and channel instances.

pub mod instance;
pub mod linalg;
pub mod rng;

pub use instance::{generate_instance, noise_variance, DetectionInstance};
pub use linalg::{qr_decompose, CMat, CVec, C64};
pub use rng::RngStream;
