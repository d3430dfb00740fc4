//! Batch calibration: configuration, the end-to-end pipeline and its
//! artifacts.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{FuncSpec, RunConfig, SnapshotFormat};
pub use pipeline::{
    error_exit_code, reprice_calls, run_pipeline, verify_calibration, PipelineOutcome, RunOptions,
    RunReport, RunStatus, VerificationReport,
};
