//! Pipeline orchestration: run configuration, per-stage execution with
//! locking and manifests, and artifact verification.

pub mod config;
pub mod manifest;
pub mod stages;

pub use config::{RunConfig, CONFIG_ENV_VAR, DEFAULT_CONFIG_PATH};
pub use manifest::{sha256_file, verify_manifests, StageManifest};
pub use stages::{run_stage, Stage, StageOutcome};
