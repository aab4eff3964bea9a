//! Engine-wide tunables shared by the frontier and benchmarking passes.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// How DMUs are grouped for benchmarking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    /// Use the `group_id` column of the dataset.
    PerFile,
    /// One group per DMU (standard per-unit DEA).
    Singletons,
    /// All DMUs in a single group with one common reference set.
    SingleGroup,
}

#[derive(Debug, Clone)]
pub struct EngineSettings {
    /// LP feasibility tolerance for attainable-set membership.
    pub feasibility_tol: f64,
    /// Slack threshold below which a point counts as Pareto-efficient.
    pub efficiency_tol: f64,
    /// Intensity values below this are treated as zero for reference-set
    /// membership.
    pub lambda_zero_tol: f64,
    /// Solver backend id.
    pub solver: String,
    pub time_limit: Option<Duration>,
    /// Link facets with SOS1 sets (default) or fall back to big-M rows.
    pub use_sos1: bool,
    pub grouping_mode: GroupingMode,
    /// When set, dump each model in LP format into this directory.
    pub dump_lp: Option<PathBuf>,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            feasibility_tol: 1e-7,
            efficiency_tol: 1e-6,
            lambda_zero_tol: 1e-9,
            solver: "microlp".to_string(),
            time_limit: None,
            use_sos1: true,
            grouping_mode: GroupingMode::PerFile,
            dump_lp: None,
        }
    }
}

impl EngineSettings {
    /// Checks that all tolerances are strictly positive.
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("feasibility_tol", self.feasibility_tol),
            ("efficiency_tol", self.efficiency_tol),
            ("lambda_zero_tol", self.lambda_zero_tol),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}
