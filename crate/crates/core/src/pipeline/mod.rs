//! Run configuration, manifests, batch orchestration and static reports.
//!
//! Every command writes into `output_dir` and finishes by writing
//! `run_manifest.json`, which lists each emitted file with its SHA-256.
//! Outputs depend only on the configuration, never on worker count.

mod commands;
mod config;
mod manifest;
mod report;
pub mod viz;

pub use commands::{
    analyze_pair, cmd_analyze_pair, cmd_batch, cmd_detect, cmd_purify, cmd_synth, discover_pairs,
    manifest_path, residual_sources, safe_id, AnalysisSettings, BatchRun, ClusterReport,
    ImageRequest, PairJob, PairOutcome, CLEAN_DIR,
};
pub use config::{
    load_grid_base, BatchConfig, DetectionConfig, InputSpec, PairPaths, ResidualPaths, RunConfig,
    SynthesisConfig, BUNDLED_BASE_ID,
};
pub use manifest::{artifact_row, sha256_file, ArtifactRow, ManifestBuilder, RunManifest, MANIFEST_NAME};
pub use report::{cmd_report, REPORT_NAME};
