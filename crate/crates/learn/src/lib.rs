//! Learned selection between the two evaluation strategies: labeling,
//! decision trees, nearest neighbours, metrics, and paired significance tests.

pub mod cart;
pub mod dataset;
pub mod knn;
pub mod metrics;
pub mod model;
pub mod stats;

pub use cart::{gini_importances, train_cart, CartModel, CartParams, Node};
pub use dataset::{label, sign_log, split_dataset, LabeledExample, Splits};
pub use knn::{train_knn, KnnModel};
pub use metrics::{compute_metrics, regression_errors, threshold_sweep, Metrics, SweepPoint};
pub use model::{cross_validate, decide, EvalMethod, Model};
pub use stats::{paired_t_test, wilcoxon_signed_rank, StatsError, TTest, Wilcoxon};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Regress,
}

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("non-finite input {0}")]
    NonFinite(f64),
    #[error("need at least {needed} examples, got {got}")]
    TooFewExamples { needed: usize, got: usize },
    #[error("training set is empty")]
    EmptyTraining,
    #[error("expected {expected} features, got {got}")]
    UnseenFeatureDimension { expected: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("operation requires a {0:?} model")]
    WrongTask(Task),
    #[error("model serialization: {0}")]
    Serde(#[from] serde_json::Error),
}
