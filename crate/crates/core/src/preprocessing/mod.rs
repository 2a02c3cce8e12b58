//! Count ingestion and environment feature preparation.

mod features;
mod ingest;
mod transform;

pub(crate) use features::day_of_year_columns;
pub use features::{
    build_feature_table, ColumnKind, CyclicColumn, EnvironmentTable, FeatureColumn, FeatureConfig,
    FeatureEncoder, RawColumn, DAY_OF_YEAR_PERIOD, DEFAULT_MAD_CUTOFF, MAX_MASKED_FRACTION,
};
pub use ingest::{ingest_counts_csv, write_counts_csv};
pub use transform::{encode_cyclic, mad_outlier_mask, standardize, ColumnScaling};
