//! Post-training differential privacy for fine-tuned model heads.
//!
//! The crate provides the additive logistic, Laplace and Gaussian noise
//! mechanisms with exact privacy accounting, a deterministic two-stage
//! learning pipeline (pretrained encoder plus fine-tuned head), an empirical
//! sensitivity sampler, the post-training protection handler, a shadow-model
//! membership-inference attack, and a sweep harness that measures the
//! privacy / utility / attack-accuracy trade-off.

pub mod error;
pub mod experiments;
pub mod mechanisms;
pub mod mia;
pub mod noise;
pub mod pipeline;
pub mod protection;
pub mod reference;
pub mod rng;
pub mod sensitivity;
pub mod stats;

pub use error::{Error, Result};
pub use mechanisms::{MechanismKind, MechanismSpec, Norm, PrivacyBudget, Sensitivity};
pub use pipeline::{Dataset, Record, TrainConfig, WeightVector};
pub use rng::RngStream;
