//! Query augmentation and synthetic workload generation.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{AggFn, CmpOp, ColumnType, Database, EngineError, Executor, Predicate, Relation, Value};
use crate::query::{Catalog, ColumnRef, Filter, JoinCond, QueryError, QuerySpec, SelectItem, TableRef};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("query has no aggregate")]
    NotAggregate,
    #[error("query has no join condition")]
    NoJoins,
    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    Bigger,
    Smaller,
}

/// Per-column data used to pick replacement literals.
struct ColumnProfile {
    rel_rows: usize,
    values: Vec<Value>,
}

impl ColumnProfile {
    fn load(db: &Database, table: &str, attr: &str, cast: bool) -> Result<ColumnProfile, EngineError> {
        let rel = db.get(table)?;
        let idx = rel.require(attr)?;
        let values = rel
            .rows()
            .iter()
            .filter_map(|r| {
                let v = &r[idx];
                match (cast, v) {
                    (true, Value::Str(s)) => s.trim().parse::<i64>().ok().map(Value::Int),
                    _ => Some(v.clone()),
                }
            })
            .collect();
        Ok(ColumnProfile {
            rel_rows: rel.len(),
            values,
        })
    }

    fn selectivity(&self, op: CmpOp, literal: &Value) -> f64 {
        if self.rel_rows == 0 {
            return 0.0;
        }
        let hits = self
            .values
            .iter()
            .filter(|v| v.compare(literal).is_some_and(|o| op.holds(o)))
            .count();
        hits as f64 / self.rel_rows as f64
    }

    /// Value at quantile `q`, interpolated for numbers.
    fn quantile(&self, q: f64) -> Option<Value> {
        let mut sorted = self.values.clone();
        sorted.sort();
        if sorted.is_empty() {
            return None;
        }
        let pos = q * (sorted.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        let frac = pos - lo as f64;
        Some(match (&sorted[lo], &sorted[hi]) {
            (Value::Int(a), Value::Int(b)) => Value::Int((*a as f64 + (*b - *a) as f64 * frac).round() as i64),
            (a, b) if a.is_numeric() && b.is_numeric() => {
                let (x, y) = (a.as_f64().unwrap_or(0.0), b.as_f64().unwrap_or(0.0));
                Value::Float(x + (y - x) * frac)
            }
            _ => sorted[pos.round() as usize].clone(),
        })
    }

    /// Other values of the column, most frequent first; ties by value.
    fn by_frequency(&self, exclude: &Value) -> Vec<Value> {
        let mut counts: HashMap<&Value, usize> = HashMap::new();
        for v in &self.values {
            if v.compare(exclude) != Some(std::cmp::Ordering::Equal) {
                *counts.entry(v).or_default() += 1;
            }
        }
        let mut out: Vec<(&Value, usize)> = counts.into_iter().collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        out.into_iter().map(|(v, _)| v.clone()).collect()
    }

    /// Replacement literals for moving the filter's result in `dir`, the
    /// preferred one first.
    fn candidates(&self, f: &Filter, dir: Direction) -> Vec<Value> {
        let mut out: Vec<Value> = match f.op {
            CmpOp::Eq | CmpOp::Ne => {
                let ranked = self.by_frequency(&f.literal);
                let want_frequent = (f.op == CmpOp::Eq) == (dir == Direction::Bigger);
                let (first, last) = (ranked.first().cloned(), ranked.last().cloned());
                if want_frequent {
                    [first, last].into_iter().flatten().collect()
                } else {
                    [last, first].into_iter().flatten().collect()
                }
            }
            CmpOp::Gt | CmpOp::Ge | CmpOp::Lt | CmpOp::Le => {
                let lower_bound = matches!(f.op, CmpOp::Gt | CmpOp::Ge);
                let (q, other) = if lower_bound == (dir == Direction::Bigger) {
                    (0.25, 0.75)
                } else {
                    (0.75, 0.25)
                };
                [self.quantile(q), self.quantile(other)].into_iter().flatten().collect()
            }
        };
        for v in &mut out {
            if let (Value::Float(x), Value::Int(_)) = (&*v, &f.literal) {
                *v = Value::Int(x.round() as i64);
            }
        }
        out
    }

    /// The first candidate that moves the selectivity in `dir`, with the
    /// size of the move; the preferred candidate and zero if none does.
    fn perturb(&self, f: &Filter, dir: Direction) -> (Value, f64) {
        let base = self.selectivity(f.op, &f.literal);
        let candidates = self.candidates(f, dir);
        for c in &candidates {
            let delta = self.selectivity(f.op, c) - base;
            let moved = if dir == Direction::Bigger { delta } else { -delta };
            if moved > 0.0 {
                return (c.clone(), moved);
            }
        }
        (candidates.into_iter().next().unwrap_or_else(|| f.literal.clone()), 0.0)
    }
}

fn filter_profile(q: &QuerySpec, f: &Filter, db: &Database) -> Result<ColumnProfile, AugmentError> {
    let table = q
        .table_of(&f.column.alias)
        .ok_or_else(|| QueryError::UnknownAlias(f.column.alias.clone()))?;
    let rel = db.get(table)?;
    let idx = rel.require(&f.column.attr)?;
    let cast = f.literal.is_numeric() && rel.column_type(idx) == ColumnType::Str;
    Ok(ColumnProfile::load(db, table, &f.column.attr, cast)?)
}

fn with_literal(q: &QuerySpec, i: usize, literal: Value) -> QuerySpec {
    let mut out = q.clone();
    out.filters[i].literal = literal;
    out
}

/// Filter augmentation. No filter gives `[q]`; one filter gives `q` and a
/// variant with a changed literal; otherwise `q`, a variant whose result
/// grows and one whose result shrinks, each changing one of the two
/// filters whose literal change moves selectivity the most.
pub fn augment_filters(q: &QuerySpec, db: &Database) -> Result<Vec<QuerySpec>, AugmentError> {
    if q.filters.is_empty() {
        return Ok(vec![q.clone()]);
    }
    struct Choices {
        bigger: (Value, f64),
        smaller: (Value, f64),
    }
    let mut options = Vec::with_capacity(q.filters.len());
    for f in &q.filters {
        let profile = filter_profile(q, f, db)?;
        options.push(Choices {
            bigger: profile.perturb(f, Direction::Bigger),
            smaller: profile.perturb(f, Direction::Smaller),
        });
    }
    if q.filters.len() == 1 {
        let o = &options[0];
        let lit = if o.smaller.1 > o.bigger.1 {
            o.smaller.0.clone()
        } else {
            o.bigger.0.clone()
        };
        return Ok(vec![q.clone(), with_literal(q, 0, lit)]);
    }
    let mut ranked: Vec<usize> = (0..options.len()).collect();
    let change = |o: &Choices| o.bigger.1.max(o.smaller.1);
    ranked.sort_by(|&a, &b| change(&options[b]).total_cmp(&change(&options[a])).then(a.cmp(&b)));
    let (a, b) = (ranked[0], ranked[1]);
    let straight = options[a].bigger.1 + options[b].smaller.1;
    let swapped = options[a].smaller.1 + options[b].bigger.1;
    let (grow, shrink) = if swapped > straight { (b, a) } else { (a, b) };
    Ok(vec![
        q.clone(),
        with_literal(q, grow, options[grow].bigger.0.clone()),
        with_literal(q, shrink, options[shrink].smaller.0.clone()),
    ])
}

/// One variant per table, selecting `MIN` of that table's first attribute.
pub fn augment_aggregate_attribute(q: &QuerySpec, catalog: &Catalog) -> Result<Vec<QuerySpec>, AugmentError> {
    if !q.is_aggregate() {
        return Err(AugmentError::NotAggregate);
    }
    q.tables
        .iter()
        .map(|t| {
            let first = catalog
                .columns(&t.table)?
                .first()
                .map(|(a, _)| a.clone())
                .ok_or_else(|| QueryError::UnknownAttribute(format!("{}.*", t.table)))?;
            let mut v = q.clone();
            v.select = vec![SelectItem::Aggregate {
                func: AggFn::Min,
                arg: Some(ColumnRef::new(&t.alias, first)),
                distinct: false,
            }];
            v.group_by.clear();
            Ok(v)
        })
        .collect()
}

/// Enumeration variants selecting pairs of join attributes: three distinct
/// random pairs if at least three join attributes exist, otherwise one
/// variant selecting all of them.
pub fn augment_enumeration<R: Rng + ?Sized>(q: &QuerySpec, rng: &mut R) -> Result<Vec<QuerySpec>, AugmentError> {
    if q.join_conds.is_empty() {
        return Err(AugmentError::NoJoins);
    }
    let attrs = q.join_attributes();
    let enumerate = |cols: &[&ColumnRef]| {
        let mut v = q.clone();
        v.select = cols.iter().map(|c| SelectItem::Column((*c).clone())).collect();
        v.group_by.clear();
        v
    };
    if attrs.len() < 3 {
        let cols: Vec<&ColumnRef> = attrs.iter().collect();
        return Ok(vec![enumerate(&cols)]);
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..attrs.len() {
        for j in i + 1..attrs.len() {
            pairs.push((i, j));
        }
    }
    let mut chosen: Vec<(usize, usize)> = pairs.choose_multiple(rng, 3).copied().collect();
    chosen.sort();
    Ok(chosen
        .into_iter()
        .map(|(i, j)| enumerate(&[&attrs[i], &attrs[j]]))
        .collect())
}

/// Full augmentation of one base query: filter variants, then for each of
/// them aggregate-attribute variants (aggregate queries) and enumeration
/// variants (queries with joins). Names carry `-augF#`, `-augA#`, `-augE#`
/// suffixes; `#0` denotes the unchanged query.
pub fn augment_query<R: Rng + ?Sized>(
    name: &str,
    q: &QuerySpec,
    db: &Database,
    rng: &mut R,
) -> Result<Vec<(String, QuerySpec)>, AugmentError> {
    let catalog = Catalog::from_db(db);
    let mut out = Vec::new();
    for (fi, fq) in augment_filters(q, db)?.into_iter().enumerate() {
        let fname = format!("{name}-augF{fi}");
        if fq.is_aggregate() {
            for (ai, aq) in augment_aggregate_attribute(&fq, &catalog)?.into_iter().enumerate() {
                out.push((format!("{fname}-augA{ai}"), aq));
            }
        }
        if !fq.join_conds.is_empty() {
            for (ei, eq) in augment_enumeration(&fq, rng)?.into_iter().enumerate() {
                out.push((format!("{fname}-augE{ei}"), eq));
            }
        }
        if !fq.is_aggregate() && fq.join_conds.is_empty() {
            out.push((fname, fq));
        }
    }
    Ok(out)
}

/// Parameters of a synthetic workload. Ranges are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub seed: u64,
    pub n_base_queries: usize,
    pub relations: (usize, usize),
    pub rows: (usize, usize),
    /// Distinct join-key values shared by joining tuples, as a fraction of
    /// the table size (1.0 gives near-unique keys).
    pub key_ratio: f64,
    /// Fraction of tuples whose join keys match nothing.
    pub dangling_fraction: f64,
    /// Probability that a table of a query carries a filter.
    pub filter_probability: f64,
    /// Fraction of queries that are single-attribute `MIN` aggregates.
    pub aggregate_fraction: f64,
    /// Prefix of generated table and query names.
    pub prefix: String,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            seed: 42,
            n_base_queries: 10,
            relations: (2, 5),
            rows: (200, 1000),
            key_ratio: 0.1,
            dangling_fraction: 0.5,
            filter_probability: 0.3,
            aggregate_fraction: 0.5,
            prefix: "w".into(),
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |m: &str| Err(AugmentError::InvalidSpec(m.into()));
        if self.relations.0 == 0 || self.relations.0 > self.relations.1 {
            return bad("relation range must be nonempty and positive");
        }
        if self.rows.0 == 0 || self.rows.0 > self.rows.1 {
            return bad("row range must be nonempty and positive");
        }
        if !(0.0..=1.0).contains(&self.dangling_fraction) {
            return bad("dangling fraction must lie in [0, 1]");
        }
        for (name, p) in [
            ("filter probability", self.filter_probability),
            ("aggregate fraction", self.aggregate_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.key_ratio > 0.0 && self.key_ratio.is_finite()) {
            return bad("key ratio must be positive");
        }
        Ok(())
    }
}

/// A database together with named queries over it.
#[derive(Clone, Debug, Default)]
pub struct Workload {
    pub db: Database,
    pub queries: Vec<(String, QuerySpec)>,
}

impl Workload {
    /// Union of two workloads over disjoint table names.
    pub fn merge(mut self, other: Workload) -> Result<Workload, AugmentError> {
        self.db.extend(other.db)?;
        self.queries.extend(other.queries);
        Ok(self)
    }
}

const DANGLING_BASE: i64 = 1_000_000_000;
const FILTER_DOMAIN: i64 = 100;

/// Random tree-shaped join queries, each over its own freshly generated
/// tables. Table `j > 0` of a query joins a random earlier table on a
/// dedicated key attribute, so FROM order is always connected.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<Workload, AugmentError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut wl = Workload::default();
    for qi in 0..spec.n_base_queries {
        let k = rng.gen_range(spec.relations.0..=spec.relations.1);
        let parents: Vec<Option<usize>> = (0..k).map(|j| (j > 0).then(|| rng.gen_range(0..j))).collect();
        let names: Vec<String> = (0..k).map(|j| format!("{}q{qi}_t{j}", spec.prefix)).collect();
        let aliases: Vec<String> = (0..k).map(|j| format!("t{j}")).collect();

        // Key attributes: edge j (child j, parent p) is attribute `k{j}`.
        let mut attrs: Vec<Vec<String>> = vec![vec!["id".into()]; k];
        for (j, p) in parents.iter().enumerate() {
            if let Some(p) = p {
                attrs[*p].push(format!("k{j}"));
                attrs[j].push(format!("k{j}"));
            }
        }
        for a in &mut attrs {
            a.push("v".into());
        }
        for j in 0..k {
            let n = rng.gen_range(spec.rows.0..=spec.rows.1);
            let domain = ((n as f64 * spec.key_ratio).round() as i64).max(1);
            let rows: Vec<Vec<Value>> = (0..n)
                .map(|r| {
                    attrs[j]
                        .iter()
                        .map(|a| match a.as_str() {
                            "id" => Value::Int(r as i64),
                            "v" => Value::Int(rng.gen_range(0..FILTER_DOMAIN)),
                            _ => {
                                if rng.gen_bool(spec.dangling_fraction) {
                                    Value::Int(DANGLING_BASE + rng.gen_range(0..DANGLING_BASE))
                                } else {
                                    Value::Int(rng.gen_range(0..domain))
                                }
                            }
                        })
                        .collect()
                })
                .collect();
            wl.db.insert(Relation::new(names[j].clone(), attrs[j].clone(), rows)?)?;
        }

        let tables: Vec<TableRef> = (0..k)
            .map(|j| TableRef {
                table: names[j].clone(),
                alias: aliases[j].clone(),
            })
            .collect();
        let join_conds: Vec<JoinCond> = parents
            .iter()
            .enumerate()
            .filter_map(|(j, p)| {
                p.map(|p| JoinCond {
                    left: ColumnRef::new(&aliases[p], format!("k{j}")),
                    right: ColumnRef::new(&aliases[j], format!("k{j}")),
                })
            })
            .collect();
        let mut filters = Vec::new();
        for alias in &aliases {
            if rng.gen_bool(spec.filter_probability) {
                let op = *[CmpOp::Le, CmpOp::Ge, CmpOp::Lt, CmpOp::Gt]
                    .choose(&mut rng)
                    .expect("nonempty");
                filters.push(Filter {
                    column: ColumnRef::new(alias, "v"),
                    op,
                    literal: Value::Int(rng.gen_range(10..90)),
                });
            }
        }
        let select = if k == 1 || rng.gen_bool(spec.aggregate_fraction) {
            let j = rng.gen_range(0..k);
            vec![SelectItem::Aggregate {
                func: AggFn::Min,
                arg: Some(ColumnRef::new(&aliases[j], "id")),
                distinct: false,
            }]
        } else {
            let mut keys: Vec<ColumnRef> = join_conds
                .iter()
                .flat_map(|c| [c.left.clone(), c.right.clone()])
                .collect();
            keys.shuffle(&mut rng);
            keys.truncate(2);
            keys.into_iter().map(SelectItem::Column).collect()
        };
        let q = QuerySpec {
            tables,
            select,
            group_by: Vec::new(),
            join_conds,
            filters,
        };
        wl.queries.push((format!("{}q{qi}", spec.prefix), q));
    }
    Ok(wl)
}

/// Fraction of the filtered table's rows that satisfy `f`.
pub fn filter_selectivity(q: &QuerySpec, f: &Filter, db: &Database) -> Result<f64, AugmentError> {
    let table = q
        .table_of(&f.column.alias)
        .ok_or_else(|| QueryError::UnknownAlias(f.column.alias.clone()))?;
    let rel = db.get(table)?;
    let idx = rel.require(&f.column.attr)?;
    let mut pred = Predicate::new(&f.column.attr, f.op, f.literal.clone());
    pred.cast_int = f.literal.is_numeric() && rel.column_type(idx) == ColumnType::Str;
    let kept = Executor::new().apply_filter(rel, &[pred])?;
    Ok(if rel.is_empty() {
        0.0
    } else {
        kept.len() as f64 / rel.len() as f64
    })
}
