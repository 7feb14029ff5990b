use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::relation::{Relation, Row};
use super::value::Value;
use super::EngineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }

    /// The operator with its operands swapped (`5 < x` is `x > 5`).
    pub fn flipped(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Single-relation comparison `attribute op literal`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub attribute: String,
    pub op: CmpOp,
    pub literal: Value,
    /// Compare `CAST(attribute AS INTEGER)` instead of the raw value.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cast_int: bool,
}

impl Predicate {
    pub fn new(attribute: impl Into<String>, op: CmpOp, literal: impl Into<Value>) -> Self {
        Predicate {
            attribute: attribute.into(),
            op,
            literal: literal.into(),
            cast_int: false,
        }
    }

    pub(crate) fn eval(&self, value: &Value) -> Result<bool, EngineError> {
        let cast;
        let value = if self.cast_int {
            cast = match value {
                Value::Str(s) => Value::Int(s.trim().parse().map_err(|_| self.mismatch(value))?),
                Value::Float(f) => Value::Int(f.trunc() as i64),
                Value::Int(i) => Value::Int(*i),
            };
            &cast
        } else {
            value
        };
        let ord = value.compare(&self.literal).ok_or_else(|| self.mismatch(value))?;
        Ok(self.op.holds(ord))
    }

    fn mismatch(&self, value: &Value) -> EngineError {
        EngineError::TypeMismatch {
            attribute: self.attribute.clone(),
            value: value.to_string(),
            literal: self.literal.to_sql(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AggFn {
    Min,
    Max,
    Count,
    Sum,
    Avg,
}

impl AggFn {
    pub fn as_str(self) -> &'static str {
        match self {
            AggFn::Min => "MIN",
            AggFn::Max => "MAX",
            AggFn::Count => "COUNT",
            AggFn::Sum => "SUM",
            AggFn::Avg => "AVG",
        }
    }

    pub fn parse(name: &str) -> Option<AggFn> {
        match name.to_ascii_uppercase().as_str() {
            "MIN" => Some(AggFn::Min),
            "MAX" => Some(AggFn::Max),
            "COUNT" => Some(AggFn::Count),
            "SUM" => Some(AggFn::Sum),
            "AVG" => Some(AggFn::Avg),
            _ => None,
        }
    }
}

impl fmt::Display for AggFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One aggregate column of a grouping operation. `attribute == None`
/// means `COUNT(*)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateSpec {
    pub func: AggFn,
    pub attribute: Option<String>,
    pub distinct: bool,
    pub output: String,
}

/// Operator invocation counts for one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub joins: u64,
    pub semijoins: u64,
    pub filters: u64,
    pub aggregates: u64,
    /// Sum of the output sizes of all joins and semi-joins.
    pub intermediate_tuples: u64,
}

const DEADLINE_CHECK_MASK: usize = 0xfff;

/// Evaluation context: owns the operator counter and an optional deadline
/// that long-running operators poll.
#[derive(Debug, Default)]
pub struct Executor {
    pub counter: OpCounter,
    deadline: Option<Instant>,
}

impl Executor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_deadline(deadline: Instant) -> Self {
        Executor {
            counter: OpCounter::default(),
            deadline: Some(deadline),
        }
    }

    #[inline]
    fn tick(&self, i: usize) -> Result<(), EngineError> {
        if i & DEADLINE_CHECK_MASK == 0 {
            self.check_deadline()?;
        }
        Ok(())
    }

    pub fn check_deadline(&self) -> Result<(), EngineError> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(EngineError::Timeout),
            _ => Ok(()),
        }
    }

    /// Keeps exactly the tuples satisfying every predicate.
    pub fn apply_filter(&mut self, rel: &Relation, preds: &[Predicate]) -> Result<Relation, EngineError> {
        let cols = preds
            .iter()
            .map(|p| rel.require(&p.attribute))
            .collect::<Result<Vec<_>, _>>()?;
        self.counter.filters += 1;
        let mut rows = Vec::new();
        'rows: for (i, row) in rel.rows().iter().enumerate() {
            self.tick(i)?;
            for (p, &c) in preds.iter().zip(&cols) {
                if !p.eval(&row[c])? {
                    continue 'rows;
                }
            }
            rows.push(row.clone());
        }
        Ok(Relation::from_parts_unchecked(rel.name.clone(), rel.schema().to_vec(), rows))
    }

    /// `left ⋉ right` on all shared attributes. Multiplicities of `left`
    /// are preserved.
    pub fn semi_join(&mut self, left: &Relation, right: &Relation) -> Result<Relation, EngineError> {
        let (lk, rk) = shared_columns(left, right);
        self.counter.semijoins += 1;
        let rows: Vec<Row> = if lk.is_empty() {
            if right.is_empty() {
                Vec::new()
            } else {
                left.rows().to_vec()
            }
        } else {
            let mut keys = HashSet::with_capacity(right.len());
            for (i, row) in right.rows().iter().enumerate() {
                self.tick(i)?;
                keys.insert(key_of(row, &rk));
            }
            let mut out = Vec::new();
            for (i, row) in left.rows().iter().enumerate() {
                self.tick(i)?;
                if keys.contains(&key_of(row, &lk)) {
                    out.push(row.clone());
                }
            }
            out
        };
        self.counter.intermediate_tuples += rows.len() as u64;
        Ok(Relation::from_parts_unchecked(left.name.clone(), left.schema().to_vec(), rows))
    }

    /// Bag natural join. Output schema is `left`'s schema followed by the
    /// attributes of `right` not in `left`. No shared attributes gives the
    /// Cartesian product.
    pub fn natural_join(&mut self, left: &Relation, right: &Relation) -> Result<Relation, EngineError> {
        let (lk, rk) = shared_columns(left, right);
        let extra: Vec<usize> = (0..right.arity()).filter(|i| !rk.contains(i)).collect();
        let mut schema = left.schema().to_vec();
        schema.extend(extra.iter().map(|&i| right.schema()[i].clone()));
        self.counter.joins += 1;

        let mut table: HashMap<Vec<Value>, Vec<usize>> = HashMap::with_capacity(right.len());
        for (i, row) in right.rows().iter().enumerate() {
            self.tick(i)?;
            table.entry(key_of(row, &rk)).or_default().push(i);
        }
        let mut rows = Vec::new();
        let mut emitted = 0usize;
        for lrow in left.rows() {
            if let Some(matches) = table.get(&key_of(lrow, &lk)) {
                for &m in matches {
                    self.tick(emitted)?;
                    emitted += 1;
                    let rrow = &right.rows()[m];
                    let mut out = Vec::with_capacity(schema.len());
                    out.extend_from_slice(lrow);
                    out.extend(extra.iter().map(|&i| rrow[i].clone()));
                    rows.push(out);
                }
            }
        }
        self.check_deadline()?;
        self.counter.intermediate_tuples += rows.len() as u64;
        Ok(Relation::from_parts_unchecked(
            format!("{}_{}", left.name, right.name),
            schema,
            rows,
        ))
    }

    /// Bag projection (duplicates retained).
    pub fn project(&mut self, rel: &Relation, attrs: &[String]) -> Result<Relation, EngineError> {
        self.project_as(rel, attrs, attrs)
    }

    /// Bag projection that also renames: column `attrs[i]` is emitted as
    /// `names[i]`. The same source attribute may appear more than once.
    pub fn project_as(
        &mut self,
        rel: &Relation,
        attrs: &[String],
        names: &[String],
    ) -> Result<Relation, EngineError> {
        debug_assert_eq!(attrs.len(), names.len());
        let cols = attrs
            .iter()
            .map(|a| rel.require(a))
            .collect::<Result<Vec<_>, _>>()?;
        if cols.iter().copied().eq(0..rel.arity()) && attrs == names {
            return Ok(rel.clone());
        }
        let mut rows = Vec::with_capacity(rel.len());
        for (i, row) in rel.rows().iter().enumerate() {
            self.tick(i)?;
            rows.push(cols.iter().map(|&c| row[c].clone()).collect());
        }
        Relation::new(rel.name.clone(), names.to_vec(), rows)
    }

    /// Grouping with aggregates. One output row per group; output schema is
    /// the grouping attributes followed by the aggregate outputs.
    ///
    /// Without grouping attributes an empty input is an error unless every
    /// aggregate is a `COUNT`, which yields zero.
    pub fn group_aggregate(
        &mut self,
        rel: &Relation,
        grouping: &[String],
        aggs: &[AggregateSpec],
    ) -> Result<Relation, EngineError> {
        let gcols = grouping
            .iter()
            .map(|a| rel.require(a))
            .collect::<Result<Vec<_>, _>>()?;
        let acols = aggs
            .iter()
            .map(|a| a.attribute.as_deref().map(|x| rel.require(x)).transpose())
            .collect::<Result<Vec<_>, _>>()?;
        for (agg, col) in aggs.iter().zip(&acols) {
            if matches!(agg.func, AggFn::Sum | AggFn::Avg) {
                if let Some(c) = col {
                    if rel.rows().iter().any(|r| !r[*c].is_numeric()) {
                        return Err(EngineError::AggregateOverNonNumeric {
                            func: agg.func,
                            attribute: agg.attribute.clone().unwrap_or_default(),
                        });
                    }
                } else {
                    return Err(EngineError::AggregateOverNonNumeric {
                        func: agg.func,
                        attribute: "*".into(),
                    });
                }
            }
        }
        self.counter.aggregates += 1;

        let mut schema = grouping.to_vec();
        schema.extend(aggs.iter().map(|a| a.output.clone()));

        if rel.is_empty() {
            if !grouping.is_empty() {
                return Relation::new(rel.name.clone(), schema, Vec::new());
            }
            if aggs.iter().all(|a| a.func == AggFn::Count) {
                let row = vec![Value::Int(0); aggs.len()];
                return Relation::new(rel.name.clone(), schema, vec![row]);
            }
            return Err(EngineError::EmptyAggregate);
        }

        let mut order: Vec<Vec<Value>> = Vec::new();
        let mut groups: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
        for (i, row) in rel.rows().iter().enumerate() {
            self.tick(i)?;
            let key = key_of(row, &gcols);
            groups
                .entry(key)
                .or_insert_with_key(|k| {
                    order.push(k.clone());
                    Vec::new()
                })
                .push(i);
        }
        let mut rows = Vec::with_capacity(order.len());
        for key in order {
            let members = &groups[&key];
            let mut out = key.clone();
            for (agg, col) in aggs.iter().zip(&acols) {
                out.push(aggregate(agg, *col, members, rel.rows()));
            }
            rows.push(out);
        }
        Relation::new(rel.name.clone(), schema, rows)
    }
}

fn aggregate(agg: &AggregateSpec, col: Option<usize>, members: &[usize], rows: &[Row]) -> Value {
    let Some(c) = col else {
        return Value::Int(members.len() as i64);
    };
    let mut values: Vec<&Value> = members.iter().map(|&i| &rows[i][c]).collect();
    if agg.distinct {
        let mut seen = HashSet::new();
        values.retain(|v| seen.insert(*v));
    }
    match agg.func {
        AggFn::Count => Value::Int(values.len() as i64),
        AggFn::Min => values
            .iter()
            .copied()
            .min_by(|a, b| a.compare(b).unwrap_or_else(|| a.cmp(b)))
            .cloned()
            .expect("non-empty group"),
        AggFn::Max => values
            .iter()
            .copied()
            .max_by(|a, b| a.compare(b).unwrap_or_else(|| a.cmp(b)))
            .cloned()
            .expect("non-empty group"),
        AggFn::Sum => {
            if values.iter().all(|v| matches!(v, Value::Int(_))) {
                Value::Int(values.iter().map(|v| if let Value::Int(i) = v { *i } else { 0 }).sum())
            } else {
                Value::Float(values.iter().filter_map(|v| v.as_f64()).sum())
            }
        }
        AggFn::Avg => {
            let sum: f64 = values.iter().filter_map(|v| v.as_f64()).sum();
            Value::Float(sum / values.len() as f64)
        }
    }
}

fn shared_columns(left: &Relation, right: &Relation) -> (Vec<usize>, Vec<usize>) {
    left.schema()
        .iter()
        .enumerate()
        .filter_map(|(i, a)| right.position(a).map(|j| (i, j)))
        .unzip()
}

#[inline]
fn key_of(row: &[Value], cols: &[usize]) -> Vec<Value> {
    cols.iter().map(|&c| row[c].clone()).collect()
}
