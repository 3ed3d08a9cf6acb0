//! Experiment runner for `rwre-core`: manifests, a deterministic worker
//! pool, run records and CSV output.

pub mod error;
pub mod experiments;
pub mod manifest;
pub mod parallel;
pub mod record;

pub use error::{FieldError, LabError, Result};
pub use experiments::{run_experiment, run_manifest};
pub use manifest::{ExperimentKind, ExperimentManifest, GreenMode};
pub use parallel::Pool;
pub use record::{emit_plotdata, write_run, Metric, Outcome, RunRecord, Table, Verdict};
