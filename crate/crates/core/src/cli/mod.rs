//! Command-line layer: case configs, the case pipeline and file exports.

pub mod config;
pub mod export;
pub mod run;

pub use config::CaseConfig;
pub use run::{
    export_basis, prepare, repair_report, run_batch, run_case, BatchItem, CaseReport, CaseResult,
    Prepared, RepairSummary,
};
