//! Query analysis and evaluation for choosing between conventional and
//! Yannakakis-style execution of acyclic conjunctive queries.

pub mod acyclic;
pub mod augment;
pub mod engine;
pub mod features;
pub mod query;
pub mod rewrite;
