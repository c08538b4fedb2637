//! Two-party vertical federated learning for click-through-rate prediction.
//!
//! A host party (labels + its own feature slots) and a guest party (extra
//! feature slots only) train a split neural network over the samples whose
//! keys they share. On top of the classical split setup the host learns a
//! representation transfer network that imitates the guest's representation,
//! which lets it train on and score samples the guest has never seen.
//!
//! Module map:
//! - [`nn`]: tensors, dense layers, embeddings, losses, optimizers, gradient checks.
//! - [`data`]: schemas, hashing, CSV ingestion, key intersection, synthetic data, batching.
//! - [`federation`]: the two parties and the message boundary between them.
//! - [`trainer`]: the two-step procedure, the baselines, checkpoints and inference.
//! - [`metrics`]: AUC, LogLoss, sliced reports and paired t-tests.
//! - [`experiment`]: config files and the commands behind the `fedud` binary.

pub mod data;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod trainer;

pub use error::{Error, Result};
