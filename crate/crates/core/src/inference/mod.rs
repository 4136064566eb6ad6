//! MAP training, HMC sampling, chain diagnostics and predictive summaries.

pub mod diagnostics;
pub mod hmc;
pub mod predictive;
pub mod sgd;

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub use diagnostics::{effective_sample_size, gelman_rubin, Diagnostic, DiagnosticSummary};
pub use hmc::{hamiltonian, hmc, leapfrog, BlockSteps, ChainSet, HmcConfig, HmcInit};
pub use predictive::{posterior_predict, predictive_draws, quantile_sorted, summarize_draws, PredictiveSummary};
pub use sgd::{sgd_map, SgdConfig, SgdOutcome};

/// One metric-trace row; `iteration` counts epochs for SGD and iterations for HMC.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    #[serde(rename = "epoch_or_iter")]
    pub iteration: usize,
    pub train_rmse: f64,
    pub valid_rmse: Option<f64>,
    pub log_joint: f64,
    pub accept_rate: Option<f64>,
}

/// Writes rows as CSV with columns `epoch_or_iter,train_rmse,valid_rmse,log_joint,accept_rate`.
pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    crate::persist::write_csv_atomic(path, rows)
}
