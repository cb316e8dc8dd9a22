//! Batch pipeline that builds a wheel design and performance dataset:
//! spoke layouts, depth maps, meshes, modal results and design-space analysis.

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod designs;
pub mod manifest;
pub mod plots;
pub mod stages;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ConfigError, PipelineConfig};
pub use dataset::{Dataset, Stage};
pub use manifest::{DatasetManifest, ManifestRow, Provenance, ReportRow, StageReport};
pub use stages::{run_all, run_stage, RunOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage} needs {} from {predecessor}; run `wheelforge {predecessor}` first", missing.display())]
    MissingPredecessor { stage: Stage, predecessor: Stage, missing: PathBuf },
    #[error(transparent)]
    ConfigInvalid(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Csv { path: PathBuf, message: String },
    #[error("manifest has no successfully simulated designs")]
    EmptyManifest,
    #[error("analysis failed: {0}")]
    Analysis(String),
    #[error("cannot start worker pool: {0}")]
    WorkerPool(String),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
