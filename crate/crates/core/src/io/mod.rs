//! Files: datasets, synthetic data, configuration, manifests and run
//! directories.

pub mod config;
pub mod data;
pub mod manifest;
pub mod run;
pub mod simulate;

pub use config::{ConfigFile, LikelihoodSection, SamplerSection};
pub use data::{load_dataset, read_dataset, write_dataset, write_dataset_file, DATASET_HEADER};
pub use manifest::{sha256_file, sha256_hex, RunManifest};
pub use run::{fit, read_run, write_run, FitOutput, RunDir};
pub use simulate::{load_params_file, simulate_dataset, ParamsFile, RateSpec, Simulation};
