use std::path::Path;

use kdloc_core::metrics::ClassificationReport;
use kdloc_core::train::StopReason;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{self, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleName {
    Teacher,
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Classification metrics as written to disk. `auc` is null when the split
/// holds a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub sensitivity: f64,
    pub specificity: f64,
    pub avg_precision: f64,
    pub avg_recall: f64,
    pub confusion: Confusion,
    pub threshold: f64,
    pub samples: usize,
}

impl MetricsReport {
    pub fn new(r: &ClassificationReport, threshold: f64) -> Self {
        let c = r.counts;
        Self {
            accuracy: r.accuracy,
            auc: r.auc,
            sensitivity: r.sensitivity,
            specificity: r.specificity,
            avg_precision: r.avg_precision,
            avg_recall: r.avg_recall,
            confusion: Confusion { tp: c.tp, tn: c.tn, fp: c.fp, fn_: c.fn_ },
            threshold,
            samples: c.total() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub role: RoleName,
    pub config: RunConfig,
    pub teacher_checkpoint: Option<String>,
    pub epoch_losses: Vec<f64>,
    pub stop_epoch: usize,
    pub stop_reason: StopReason,
    /// Checkpoint file name, relative to the record's directory.
    pub checkpoint: String,
    /// Test-split classification metrics of the final model.
    pub metrics: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        error::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        error::write_json(path, self)
    }
}
