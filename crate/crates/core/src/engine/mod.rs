//! In-memory bag-semantics relational engine.

mod estimate;
mod eval;
mod ops;
mod relation;
mod value;

use thiserror::Error;

pub use estimate::{estimate_cardinalities, estimate_with_statistics, ColumnStatistics, EstimateSet, Statistics, TableStatistics};
pub use eval::{evaluate_baseline, evaluate_yannakakis, finalize, full_reduce, scan_atom, semi_join_up};
pub use ops::{AggFn, AggregateSpec, CmpOp, Executor, OpCounter, Predicate};
pub use relation::{load_csv, Database, Relation, Row};
pub use value::{ColumnType, Value};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown attribute '{attribute}' in relation '{relation}'")]
    UnknownAttribute { relation: String, attribute: String },
    #[error("attribute '{attribute}' appears twice in relation '{relation}'")]
    DuplicateAttribute { relation: String, attribute: String },
    #[error("relation '{relation}' has arity {expected} but a row has {found} values")]
    ArityMismatch {
        relation: String,
        expected: usize,
        found: usize,
    },
    #[error("cannot compare {attribute} value '{value}' with {literal}")]
    TypeMismatch {
        attribute: String,
        value: String,
        literal: String,
    },
    #[error("{func} over non-numeric attribute {attribute}")]
    AggregateOverNonNumeric { func: AggFn, attribute: String },
    #[error("aggregate over empty input")]
    EmptyAggregate,
    #[error("unknown table '{0}'")]
    UnknownTable(String),
    #[error("table '{0}' defined twice")]
    DuplicateTable(String),
    #[error("invalid join tree: {0}")]
    InvalidJoinTree(String),
    #[error("intermediate '{0}' used before it was defined")]
    UndefinedIntermediate(String),
    #[error("evaluation exceeded its deadline")]
    Timeout,
    #[error("load error: {0}")]
    Load(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
