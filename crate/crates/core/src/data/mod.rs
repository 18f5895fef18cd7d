//! Datasets: JSONL ingestion, feature selection, prevalence estimation, and
//! the seeded synthetic concept-drift generator.

pub mod drift;
pub mod features;
pub mod ingest;

pub use drift::{
    drift_parameter_tables, generate_drift_dataset, mean_malware_tv, ActivationProbs,
    DriftGenConfig, DriftTables,
};
pub use features::{estimate_sigma_hat, select_features, FeatureMap};
pub use ingest::{
    load_dataset, manifest_path, record_line, save_dataset, DatasetManifest, DatasetSource,
    MonthCounts,
};
