//! Pipeline orchestration: manifests, configuration, stage execution,
//! the synthetic corpus, sweeps, and reports.

mod config;
mod manifest;
mod report;
mod stages;
mod sweep;
mod synth;

pub use config::{parse_key_values, PipelineConfig, Stage};
pub use manifest::{
    read_manifest, validate_rows, write_manifest, ManifestLabel, ManifestRow, SplitTag,
};
pub use report::{
    class_counts, detection_counts, duration_histogram, write_report, REPORT_THRESHOLDS,
};
pub use stages::{DirFeatureStore, FeatureStore, Pipeline, RunSummary};
pub use sweep::{sweep, sweep_csv, SweepCell, SweepDimension};
pub use synth::{
    generate_synthetic_corpus, read_ground_truth, segmentation_recall, write_ground_truth,
    GroundTruthSegment, SynthOutput, SynthSpec,
};

use thiserror::Error;

/// Pipeline failures, classified for CLI exit codes: configuration errors
/// exit 2, data errors 3, stage failures 4.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Stage { .. } => 4,
        }
    }

    /// Attach the failing stage's name to an error bubbling out of it.
    pub fn in_stage(self, stage: &str) -> PipelineError {
        match self {
            PipelineError::Stage { .. } => self,
            PipelineError::Config(m) => PipelineError::Config(format!("[stage {stage}] {m}")),
            PipelineError::Data(m) => PipelineError::Data(format!("[stage {stage}] {m}")),
        }
    }
}
