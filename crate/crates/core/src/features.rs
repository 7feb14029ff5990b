//! Fixed-order numeric description of a query used by the selector.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acyclic::JoinTree;
use crate::engine::EstimateSet;
use crate::query::NormalizedCQ;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("cannot summarize an empty set of values")]
    EmptySet,
}

/// Summary of a variable-length set of values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SixStats {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
}

impl SixStats {
    pub const SUFFIXES: [&'static str; 6] = ["min", "q25", "median", "q75", "max", "mean"];

    pub fn values(&self) -> [f64; 6] {
        [self.min, self.q25, self.median, self.q75, self.max, self.mean]
    }

    fn or_zero(values: &[f64]) -> SixStats {
        reduce_set(values).unwrap_or_default()
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Quantiles interpolate linearly between the sorted values at position
/// `q·(n−1)`.
pub fn reduce_set(values: &[f64]) -> Result<SixStats, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptySet);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(SixStats {
        min: sorted[0],
        q25: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q75: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean: mean.clamp(sorted[0], sorted[sorted.len() - 1]),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub is_0ma: f64,
    pub n_relations: f64,
    pub n_conditions: f64,
    pub n_filters: f64,
    pub n_joins: f64,
    pub depth: f64,
    /// Per attribute class, the number of tree nodes containing it.
    pub container_counts: SixStats,
    /// Per inner node, its number of children.
    pub branching_degrees: SixStats,
    pub est_total_cost: f64,
    pub est_single_table_rows: SixStats,
    pub est_join_rows: SixStats,
}

const SCALARS_HEAD: [&str; 6] = ["is_0ma", "n_relations", "n_conditions", "n_filters", "n_joins", "depth"];

impl FeatureVector {
    pub const LEN: usize = 31;

    /// Column names in serialization order.
    pub fn names() -> Vec<String> {
        fn stats(prefix: &str) -> Vec<String> {
            SixStats::SUFFIXES.iter().map(|s| format!("{prefix}_{s}")).collect()
        }
        let mut out: Vec<String> = SCALARS_HEAD.iter().map(|s| s.to_string()).collect();
        out.extend(stats("container_counts"));
        out.extend(stats("branching_degrees"));
        out.push("est_total_cost".into());
        out.extend(stats("est_single_table_rows"));
        out.extend(stats("est_join_rows"));
        out
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = vec![
            self.is_0ma,
            self.n_relations,
            self.n_conditions,
            self.n_filters,
            self.n_joins,
            self.depth,
        ];
        out.extend(self.container_counts.values());
        out.extend(self.branching_degrees.values());
        out.push(self.est_total_cost);
        out.extend(self.est_single_table_rows.values());
        out.extend(self.est_join_rows.values());
        out
    }

    /// Inverse of [`FeatureVector::to_vec`].
    pub fn from_slice(v: &[f64]) -> Option<FeatureVector> {
        if v.len() != Self::LEN {
            return None;
        }
        let six = |i: usize| SixStats {
            min: v[i],
            q25: v[i + 1],
            median: v[i + 2],
            q75: v[i + 3],
            max: v[i + 4],
            mean: v[i + 5],
        };
        Some(FeatureVector {
            is_0ma: v[0],
            n_relations: v[1],
            n_conditions: v[2],
            n_filters: v[3],
            n_joins: v[4],
            depth: v[5],
            container_counts: six(6),
            branching_degrees: six(12),
            est_total_cost: v[18],
            est_single_table_rows: six(19),
            est_join_rows: six(25),
        })
    }

    /// Flat object keyed by feature name, in serialization order.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = Self::names()
            .into_iter()
            .zip(self.to_vec())
            .map(|(k, v)| (k, serde_json::json!(v)))
            .collect();
        serde_json::Value::Object(map)
    }

    pub fn csv_header() -> String {
        Self::names().join(",")
    }

    pub fn to_csv_row(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.to_vec().iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{v}").expect("writing to a string");
        }
        s
    }
}

pub fn extract_features(cq: &NormalizedCQ, tree: &JoinTree, est: &EstimateSet) -> FeatureVector {
    let containers: Vec<f64> = (0..cq.class_count())
        .map(|c| cq.atoms_containing(crate::query::ClassId(c)).count() as f64)
        .collect();
    let branching: Vec<f64> = (0..tree.len())
        .filter(|&n| !tree.is_leaf(n))
        .map(|n| tree.children(n).len() as f64)
        .collect();
    let filters = cq.filter_count() as f64;
    let joins = cq.join_count() as f64;
    FeatureVector {
        is_0ma: if tree.oma { 1.0 } else { 0.0 },
        n_relations: cq.atoms.len() as f64,
        n_conditions: filters + joins,
        n_filters: filters,
        n_joins: joins,
        depth: tree.depth() as f64,
        container_counts: SixStats::or_zero(&containers),
        branching_degrees: SixStats::or_zero(&branching),
        est_total_cost: est.total_cost,
        est_single_table_rows: SixStats::or_zero(&est.table_rows),
        est_join_rows: SixStats::or_zero(&est.join_rows),
    }
}
