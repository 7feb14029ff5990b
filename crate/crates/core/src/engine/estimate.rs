use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::eval::scan_atom;
use super::ops::{CmpOp, Executor, Predicate};
use super::relation::{Database, Relation};
use super::value::Value;
use super::EngineError;
use crate::query::{Atom, ClassId, NormalizedCQ};

/// Optimizer-style estimates for one query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    /// Row count of each atom after its filters (exact), in FROM order.
    pub table_rows: Vec<f64>,
    /// Estimated output rows of each join of the left-deep FROM-order plan.
    pub join_rows: Vec<f64>,
    /// Sum of all join estimates and all filtered row counts.
    pub total_cost: f64,
}

/// Statistics of one base column.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnStatistics {
    pub distinct: usize,
    /// Sorted values, kept for all-int or all-float columns only.
    sorted: Option<Vec<Value>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableStatistics {
    pub rows: usize,
    pub columns: HashMap<String, ColumnStatistics>,
}

impl TableStatistics {
    pub fn analyze(rel: &Relation) -> TableStatistics {
        let columns = rel
            .schema()
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let numeric = match rel.rows().first().map(|r| &r[i]) {
                    Some(Value::Int(_)) => rel.rows().iter().all(|r| matches!(r[i], Value::Int(_))),
                    Some(Value::Float(_)) => rel.rows().iter().all(|r| matches!(r[i], Value::Float(_))),
                    _ => false,
                };
                let sorted = numeric.then(|| {
                    let mut v: Vec<Value> = rel.rows().iter().map(|r| r[i].clone()).collect();
                    v.sort_unstable();
                    v
                });
                let distinct = match &sorted {
                    Some(v) => v.iter().zip(v.iter().skip(1)).filter(|(a, b)| a != b).count() + usize::from(!v.is_empty()),
                    None => rel.distinct_count(i),
                };
                (name.clone(), ColumnStatistics { distinct, sorted })
            })
            .collect();
        TableStatistics { rows: rel.len(), columns }
    }

    /// Exact count of rows satisfying `pred`, if answerable from the
    /// sorted column.
    fn count(&self, pred: &Predicate) -> Option<usize> {
        let sorted = self.columns.get(&pred.attribute)?.sorted.as_ref()?;
        if pred.cast_int || !pred.literal.is_numeric() {
            return None;
        }
        let lit = &pred.literal;
        let below = sorted.partition_point(|v| v.compare(lit) == Some(Ordering::Less));
        let upto = sorted.partition_point(|v| v.compare(lit) != Some(Ordering::Greater));
        let n = sorted.len();
        Some(match pred.op {
            CmpOp::Lt => below,
            CmpOp::Le => upto,
            CmpOp::Gt => n - upto,
            CmpOp::Ge => n - below,
            CmpOp::Eq => upto - below,
            CmpOp::Ne => n - (upto - below),
        })
    }
}

/// Per-table statistics gathered once per database, like ANALYZE.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Statistics {
    tables: HashMap<String, TableStatistics>,
}

impl Statistics {
    pub fn analyze(db: &Database) -> Statistics {
        Statistics {
            tables: db.tables().map(|t| (t.name.clone(), TableStatistics::analyze(t))).collect(),
        }
    }

    fn analyze_query(cq: &NormalizedCQ, db: &Database) -> Result<Statistics, EngineError> {
        let mut tables = HashMap::new();
        for atom in &cq.atoms {
            if !tables.contains_key(&atom.table) {
                tables.insert(atom.table.clone(), TableStatistics::analyze(db.get(&atom.table)?));
            }
        }
        Ok(Statistics { tables })
    }

    pub fn table(&self, name: &str) -> Option<&TableStatistics> {
        self.tables.get(name)
    }
}

/// Exact post-filter row count of an atom.
fn filtered_rows(atom: &Atom, db: &Database, stats: &TableStatistics) -> Result<usize, EngineError> {
    let mut first: Vec<(ClassId, &str)> = Vec::new();
    let mut repeated = false;
    for (attr, class) in &atom.columns {
        if first.iter().any(|(c, _)| c == class) {
            repeated = true;
        } else {
            first.push((*class, attr));
        }
    }
    match atom.filters.as_slice() {
        [] if !repeated => return Ok(stats.rows),
        [p] if !repeated => {
            if let Some(n) = stats.count(p) {
                return Ok(n);
            }
        }
        _ => {}
    }
    let mut ex = Executor::new();
    Ok(scan_atom(atom, db, &mut ex)?.len())
}

/// Post-filter counts are exact. Each join of the left-deep FROM-order plan
/// is estimated with `|A ⋈ B| = |A|·|B| / Π max(ndv_A(x), ndv_B(x))` over
/// the shared attributes `x`, where `ndv` is the base column's distinct
/// count capped by the atom's filtered row count.
pub fn estimate_cardinalities(cq: &NormalizedCQ, db: &Database) -> Result<EstimateSet, EngineError> {
    estimate_with_statistics(cq, db, &Statistics::analyze_query(cq, db)?)
}

/// As [`estimate_cardinalities`], reading precomputed statistics.
pub fn estimate_with_statistics(cq: &NormalizedCQ, db: &Database, stats: &Statistics) -> Result<EstimateSet, EngineError> {
    let mut table_rows = Vec::with_capacity(cq.atoms.len());
    let mut ndvs: Vec<HashMap<String, f64>> = Vec::with_capacity(cq.atoms.len());
    for atom in &cq.atoms {
        let ts = match stats.table(&atom.table) {
            Some(t) => t,
            None => return Err(EngineError::UnknownTable(atom.table.clone())),
        };
        let rows = filtered_rows(atom, db, ts)? as f64;
        let mut ndv = HashMap::new();
        for (attr, class) in &atom.columns {
            if ndv.contains_key(&class.name()) || cq.atoms_containing(*class).nth(1).is_none() {
                continue;
            }
            let col = ts.columns.get(attr).ok_or_else(|| EngineError::UnknownAttribute {
                relation: atom.table.clone(),
                attribute: attr.clone(),
            })?;
            ndv.insert(class.name(), (col.distinct as f64).min(rows));
        }
        table_rows.push(rows);
        ndvs.push(ndv);
    }
    let stats = ndvs;

    let mut join_rows = Vec::new();
    let mut acc_rows = table_rows.first().copied().unwrap_or(0.0);
    let mut acc_ndv = stats.first().cloned().unwrap_or_default();
    for (rows, ndv) in table_rows.iter().zip(&stats).skip(1) {
        let mut est = acc_rows * rows;
        let mut merged = acc_ndv.clone();
        for (attr, &n) in ndv {
            match acc_ndv.get(attr) {
                Some(&m) => {
                    let denom = m.max(n);
                    est = if denom > 0.0 { est / denom } else { 0.0 };
                    merged.insert(attr.clone(), m.min(n));
                }
                None => {
                    merged.insert(attr.clone(), n);
                }
            }
        }
        for v in merged.values_mut() {
            *v = v.min(est);
        }
        join_rows.push(est);
        acc_rows = est;
        acc_ndv = merged;
    }
    let total_cost = join_rows.iter().sum::<f64>() + table_rows.iter().sum::<f64>();
    Ok(EstimateSet {
        table_rows,
        join_rows,
        total_cost,
    })
}
