//! Stage wiring: configuration, per-scene steps, the on-disk runner and
//! its manifests.

pub mod config;
pub mod manifest;
pub mod run;
pub mod steps;

pub use config::{AogConfig, DatasetConfig, EvalConfig, PipelineConfig, ProposalConfig, RankerConfig, CONFIG_ENV};
pub use manifest::{FileDigest, RunManifest};
pub use run::{render_compare, read_trace, CompareReport, EvalSummary, ModeComparison, ParseRecord, Run, Stage, StageOutcome};
pub use steps::*;
