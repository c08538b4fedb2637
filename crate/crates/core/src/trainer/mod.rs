//! The two-step federated procedure, the baselines, checkpoints and scoring.
//!
//! Step 1 trains every component on aligned rows with
//! `loss1 + α·loss2`, where `loss2` pulls the transfer network's output
//! towards the guest representation. Step 2 freezes the transfer network and
//! trains on paired aligned / unaligned batches with `loss_a + β·loss_u`.

mod checkpoint;
mod config;
mod model;
mod predict;
mod steps;
mod train;

pub use checkpoint::{Checkpoint, Model, Phase};
pub use config::{Method, OptimizerKind, TrainConfig};
pub use model::{build_guest, build_host, build_rep, build_top, parameter_digest, LocalDnn, Session};
pub use predict::predict;
pub use steps::{aligned_step, paired_step, AlignedLosses, PairedLosses};
pub use train::{
    step2_session, train, train_fedsplitnn, train_local_dnn, train_step1, train_step2, EpochRecord, TrainOutcome,
};
