//! Experiment orchestration: scenario presets for each dynamical regime,
//! config-file parsing, deterministic batch execution with CSV and JSON
//! artifacts, and the cross-module acceptance suite.

pub mod acceptance;
pub mod config;
pub mod scenario;
pub mod weakform;

pub use acceptance::{run_all, CriterionReport};
pub use config::{RunSpec, SourceChoice};
pub use scenario::{
    k_sweep, outputs_identical, rerun_from_manifest, run_from_spec, run_scenario, KSweepRow,
    RunManifest, Scenario, ScenarioKind, VerdictRecord,
};
pub use weakform::{weak_form_residual, TestFunction, WeakFormPoint};
