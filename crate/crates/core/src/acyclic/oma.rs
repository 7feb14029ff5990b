use serde::{Deserialize, Serialize};

use crate::engine::AggFn;
use crate::query::{NormalizedCQ, OutputItem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OmaFailure {
    NotAggregate,
    NotSetSafe,
    NotGuarded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmaResult {
    pub is_0ma: bool,
    pub guard: Option<usize>,
    pub failure: Option<OmaFailure>,
}

impl OmaResult {
    fn fail(reason: OmaFailure) -> Self {
        OmaResult {
            is_0ma: false,
            guard: None,
            failure: Some(reason),
        }
    }
}

/// An aggregate is set-safe if duplicate elimination cannot change it.
pub fn is_set_safe(func: AggFn, distinct: bool) -> bool {
    distinct || matches!(func, AggFn::Min | AggFn::Max)
}

/// Decides whether the query can be answered from the root relation after
/// the bottom-up semi-join pass alone.
///
/// When several atoms contain every grouping and aggregate attribute, the
/// last one in FROM order becomes the guard.
pub fn classify_0ma(cq: &NormalizedCQ) -> OmaResult {
    if !cq.aggregate {
        return OmaResult::fail(OmaFailure::NotAggregate);
    }
    let set_safe = cq.output.iter().all(|item| match item {
        OutputItem::Aggregate {
            func,
            class,
            distinct,
            ..
        } => class.is_some() && is_set_safe(*func, *distinct),
        OutputItem::Column { .. } => true,
    });
    if !set_safe {
        return OmaResult::fail(OmaFailure::NotSetSafe);
    }
    let needed = cq.output_classes();
    let guard = cq
        .atoms
        .iter()
        .enumerate()
        .rev()
        .find(|(_, a)| needed.iter().all(|c| a.contains(*c)))
        .map(|(i, _)| i);
    match guard {
        Some(g) => OmaResult {
            is_0ma: true,
            guard: Some(g),
            failure: None,
        },
        None => OmaResult::fail(OmaFailure::NotGuarded),
    }
}
