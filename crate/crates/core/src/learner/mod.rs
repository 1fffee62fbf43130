//! Learned inverse operators.

pub mod features;
pub mod mlp;
pub mod pool;

pub use features::{build_dataset, build_dataset_from_rest, Dataset, FeatureMode, FeatureSpec, TapLayout};
pub use mlp::{split_rows, train_mlp, MinMax, MlpModel, TrainConfig, TrainReport};
pub use pool::{ModelPool, PoolEntry};
