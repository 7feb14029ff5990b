use std::path::Path;

use serde::{Deserialize, Serialize};
use smash_core::augment::{generate_workload, Workload, WorkloadSpec};
use smash_core::query::{parse_query, QuerySpec};

use crate::HarnessError;

/// Half the queries join many-to-many keys with dangling tuples under a
/// MIN aggregate, where semi-join reduction pays off; the other half
/// enumerate near-unique key joins, where it is pure overhead.
pub fn two_regime_workload(n_queries: usize, seed: u64) -> Result<Workload, HarnessError> {
    let heavy = WorkloadSpec {
        seed,
        n_base_queries: n_queries / 2,
        relations: (3, 4),
        rows: (600, 1000),
        key_ratio: 0.05,
        dangling_fraction: 0.4,
        filter_probability: 0.3,
        aggregate_fraction: 1.0,
        prefix: "h".into(),
    };
    let light = WorkloadSpec {
        seed: seed.wrapping_add(1),
        n_base_queries: n_queries - n_queries / 2,
        relations: (3, 4),
        rows: (600, 1200),
        key_ratio: 1.0,
        dangling_fraction: 0.0,
        filter_probability: 0.0,
        aggregate_fraction: 0.0,
        prefix: "l".into(),
    };
    Ok(generate_workload(&heavy)?.merge(generate_workload(&light)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFileEntry {
    pub id: String,
    pub sql: String,
}

pub fn save_queries(path: &Path, queries: &[(String, QuerySpec)]) -> Result<(), HarnessError> {
    let entries: Vec<QueryFileEntry> =
        queries.iter().map(|(id, q)| QueryFileEntry { id: id.clone(), sql: q.to_string() }).collect();
    std::fs::write(path, serde_json::to_string_pretty(&entries)?)?;
    Ok(())
}

pub fn load_queries(path: &Path) -> Result<Vec<(String, QuerySpec)>, HarnessError> {
    let entries: Vec<QueryFileEntry> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    entries.into_iter().map(|e| Ok((e.id, parse_query(&e.sql)?))).collect()
}
