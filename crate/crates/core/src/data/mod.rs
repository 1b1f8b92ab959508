//! Tabular datasets with a binary label and a binary sensitive attribute,
//! plus everything that produces or reshapes them: CSV ingestion, synthetic
//! generation, skewing, client partitioning and the validation split.

mod csv;
mod dataset;
mod split;
mod synthetic;

pub use self::csv::{
    load_csv, read_csv, write_csv, ColumnKind, DatasetSchema, FeatureColumn, LabelColumn,
    SensitiveColumn,
};
pub use dataset::{Group, GroupStats, TabularDataset};
pub use split::{partition, skew, split_validation, Behavior, ClientProfile, ClientSpec, SkewSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec, GROUP_SHIFT, LABEL_SHIFT};
