//! End-to-end imbalanced-stream experiments: the naive (N), rebalanced (RB)
//! and recoded (RC) methods, per-checkpoint accuracies, trial aggregation
//! and update latency.

mod report;
mod timing;
mod trial;

pub use report::{aggregate, format_pct, mean_std, CellStats, ExperimentResult, MetricStats, CURVE_HEADER};
pub use timing::{timing_probe, LatencyRow};
pub use trial::{rotate_imbalanced, run_trial, run_trials, Hyper, RotationResult, TrialResult};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassifierError;
use crate::datasets::DatasetError;
use crate::model_selection::SelectionError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("{method} at checkpoint {checkpoint}: {source}")]
    Checkpoint {
        method: Method,
        checkpoint: usize,
        #[source]
        source: ClassifierError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Output(String),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Incremental RLSC without recoding.
    N,
    /// Batch class-weighted RLSC, retrained at each checkpoint.
    RB,
    /// Incremental RLSC with recoding.
    RC,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::N, Method::RB, Method::RC];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::N => "N",
            Method::RB => "RB",
            Method::RC => "RC",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "N" => Ok(Method::N),
            "RB" => Ok(Method::RB),
            "RC" => Ok(Method::RC),
            other => Err(format!("unknown method '{other}' (expected N, RB or RC)")),
        }
    }
}

/// Which test examples an accuracy is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassFilter {
    All,
    Only(usize),
    Except(usize),
}

impl ClassFilter {
    pub fn admits(self, label: usize) -> bool {
        match self {
            ClassFilter::All => true,
            ClassFilter::Only(c) => label == c,
            ClassFilter::Except(c) => label != c,
        }
    }
}

/// Exact-match fraction over the examples the filter admits; `None` if it
/// admits none.
pub fn accuracy(predictions: &[usize], truths: &[usize], filter: ClassFilter) -> Option<f64> {
    assert_eq!(predictions.len(), truths.len(), "one prediction per truth");
    let (hits, total) = predictions
        .iter()
        .zip(truths)
        .filter(|(_, &t)| filter.admits(t))
        .fold((0usize, 0usize), |(h, n), (p, t)| (h + usize::from(p == t), n + 1));
    (total > 0).then(|| hits as f64 / total as f64)
}

/// One evaluation of one method at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointAccuracy {
    pub method: Method,
    pub checkpoint: usize,
    pub trial: usize,
    pub total: f64,
    pub imbalanced: f64,
    pub balanced: f64,
    pub lambda: f64,
    pub alpha: f64,
}
