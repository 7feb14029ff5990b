//! Restricted SQL dialect: parsing and equi-join normalization.

pub mod ast;
mod lexer;
mod normalize;
mod parser;
mod spec;

use thiserror::Error;

pub use normalize::{normalize, Atom, Catalog, ClassId, NormalizedCQ, OutputItem};
pub use parser::{parse_script, parse_statement};
pub use spec::{parse_query, ColumnRef, Filter, JoinCond, QuerySpec, SelectItem, TableRef};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unsupported construct: {construct}")]
    Unsupported {
        construct: String,
        line: usize,
        col: usize,
    },
    #[error("alias '{0}' is not declared in FROM")]
    UnknownAlias(String),
    #[error("alias '{0}' declared twice")]
    DuplicateAlias(String),
    #[error("column '{0}' is ambiguous without a table alias")]
    AmbiguousColumn(String),
    #[error("column {0} must appear in GROUP BY")]
    NotGrouped(String),
    #[error("unknown table '{0}'")]
    UnknownTable(String),
    #[error("unknown attribute {0}")]
    UnknownAttribute(String),
}
