//! Schemas, ingestion, key intersection, synthetic data and batching.

mod alignment;
mod batch;
mod dataset;
mod hashing;
mod schema;
mod synthetic;
mod table;

pub use alignment::{intersect_keys, split_by_alignment};
pub use batch::batch_iter;
pub use dataset::{
    AccessCounter, AlignedBatch, AlignedSet, DatasetSplit, SplitPart, SplitRule, UnalignedBatch, UnalignedSet,
};
pub use hashing::{fnv1a_64, hash_feature, MISSING_TOKEN};
pub use schema::{check_disjoint, FeatureSchema, Party, Sample, SlotSpec};
pub use synthetic::{gen_synthetic, SyntheticConfig, SyntheticData, LATENT_DIM};
pub use table::{load_csv, RawTable};
