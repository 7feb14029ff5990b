//! Timing harness, dataset assembly and end-to-end evaluation of the learned
//! strategy selector.

pub mod e2e;
pub mod harness;
pub mod selector;
pub mod workload;

pub use e2e::{smash_e2e, E2eReport, QueryOutcome, StrategyTotals};
pub use harness::{run_workload, PreparedQuery, RunConfig, RunEntry, RunLog, Skipped, Strategy};
pub use selector::{
    build_dataset, dataset_csv, feature_table, query_features, train_selector, SelectorKind, TrainedSelector,
};
pub use workload::{load_queries, save_queries, two_regime_workload, QueryFileEntry};

use smash_core::acyclic::AcyclicError;
use smash_core::augment::AugmentError;
use smash_core::engine::EngineError;
use smash_core::query::QueryError;
use smash_core::rewrite::RewriteError;
use smash_learn::LearnError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Acyclic(#[from] AcyclicError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("query {query}: no {strategy:?} measurement")]
    MissingStrategy { query: String, strategy: Strategy },
    #[error("query {0}: no feature vector")]
    MissingFeatures(String),
    #[error("unknown query id {0}")]
    UnknownQuery(String),
    #[error("model expects {expected} features, query has {got}")]
    UnseenFeatureDimension { expected: usize, got: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
