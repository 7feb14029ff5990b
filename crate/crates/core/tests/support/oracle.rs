//! Brute-force nested-loop evaluation of a query spec, written without the
//! engine's operators.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use smash_core::engine::{AggFn, CmpOp, Database, Value};
use smash_core::query::{ColumnRef, QuerySpec, SelectItem};

#[derive(Debug, PartialEq)]
pub enum OracleError {
    EmptyAggregate,
}

fn cmp(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        (Value::Str(_), _) | (_, Value::Str(_)) => None,
        _ => a.as_f64()?.partial_cmp(&b.as_f64()?),
    }
}

fn holds(op: CmpOp, ord: Ordering) -> bool {
    match op {
        CmpOp::Eq => ord.is_eq(),
        CmpOp::Ne => ord.is_ne(),
        CmpOp::Lt => ord.is_lt(),
        CmpOp::Le => ord.is_le(),
        CmpOp::Gt => ord.is_gt(),
        CmpOp::Ge => ord.is_ge(),
    }
}

struct Bound<'a> {
    q: &'a QuerySpec,
    db: &'a Database,
    rows: Vec<&'a [Value]>,
}

impl<'a> Bound<'a> {
    fn value(&self, c: &ColumnRef) -> Option<&'a Value> {
        let i = self.q.tables.iter().position(|t| t.alias == c.alias)?;
        let row = *self.rows.get(i)?;
        let rel = self.db.get(&self.q.tables[i].table).ok()?;
        Some(&row[rel.position(&c.attr)?])
    }
}

/// Every combination of base rows satisfying all conditions, as one row
/// slice per FROM entry.
pub fn assignments<'a>(q: &'a QuerySpec, db: &'a Database) -> Vec<Vec<&'a [Value]>> {
    let mut out = Vec::new();
    let mut b = Bound { q, db, rows: Vec::new() };
    search(&mut b, &mut out);
    out
}

fn search<'a>(b: &mut Bound<'a>, out: &mut Vec<Vec<&'a [Value]>>) {
    let depth = b.rows.len();
    if depth == b.q.tables.len() {
        out.push(b.rows.clone());
        return;
    }
    let rel = b.db.get(&b.q.tables[depth].table).expect("table exists");
    let alias = &b.q.tables[depth].alias;
    for row in rel.rows() {
        b.rows.push(row);
        let bound_now = |c: &ColumnRef| c.alias == *alias;
        let ok_filters = b
            .q
            .filters
            .iter()
            .filter(|f| bound_now(&f.column))
            .all(|f| cmp(b.value(&f.column).unwrap(), &f.literal).is_some_and(|o| holds(f.op, o)));
        let ok_joins = ok_filters
            && b.q.join_conds.iter().all(|j| match (b.value(&j.left), b.value(&j.right)) {
                (Some(l), Some(r)) if bound_now(&j.left) || bound_now(&j.right) => l == r,
                _ => true,
            });
        if ok_joins {
            search(b, out);
        }
        b.rows.pop();
    }
}

fn aggregate(func: AggFn, distinct: bool, mut values: Vec<Value>) -> Value {
    if distinct {
        values.sort();
        values.dedup();
    }
    match func {
        AggFn::Count => Value::Int(values.len() as i64),
        AggFn::Min => values.into_iter().min_by(|a, b| cmp(a, b).unwrap()).unwrap(),
        AggFn::Max => values.into_iter().max_by(|a, b| cmp(a, b).unwrap()).unwrap(),
        AggFn::Sum => {
            if values.iter().all(|v| matches!(v, Value::Int(_))) {
                Value::Int(values.iter().map(|v| if let Value::Int(i) = v { *i } else { 0 }).sum())
            } else {
                Value::Float(values.iter().map(|v| v.as_f64().unwrap()).sum())
            }
        }
        AggFn::Avg => Value::Float(values.iter().map(|v| v.as_f64().unwrap()).sum::<f64>() / values.len() as f64),
    }
}

/// Answer rows of `q` over `db`, sorted.
pub fn evaluate(q: &QuerySpec, db: &Database) -> Result<Vec<Vec<Value>>, OracleError> {
    let all = assignments(q, db);
    let value_in = |rows: &Vec<&[Value]>, c: &ColumnRef| -> Value {
        Bound {
            q,
            db,
            rows: rows.clone(),
        }
        .value(c)
        .unwrap()
        .clone()
    };
    let mut out: Vec<Vec<Value>> = Vec::new();
    if !q.is_aggregate() {
        for rows in &all {
            out.push(
                q.select
                    .iter()
                    .map(|s| match s {
                        SelectItem::Column(c) => value_in(rows, c),
                        SelectItem::Aggregate { .. } => unreachable!(),
                    })
                    .collect(),
            );
        }
    } else {
        let mut groups: BTreeMap<Vec<Value>, Vec<&Vec<&[Value]>>> = BTreeMap::new();
        for rows in &all {
            let key: Vec<Value> = q.group_by.iter().map(|c| value_in(rows, c)).collect();
            groups.entry(key).or_default().push(rows);
        }
        if groups.is_empty() && q.group_by.is_empty() {
            let all_count = q
                .select
                .iter()
                .all(|s| matches!(s, SelectItem::Aggregate { func: AggFn::Count, .. }));
            if !all_count {
                return Err(OracleError::EmptyAggregate);
            }
            out.push(vec![Value::Int(0); q.select.len()]);
        }
        for (_, members) in groups {
            out.push(
                q.select
                    .iter()
                    .map(|s| match s {
                        SelectItem::Column(c) => value_in(members[0], c),
                        SelectItem::Aggregate { func, arg, distinct } => match arg {
                            None => Value::Int(members.len() as i64),
                            Some(c) => aggregate(*func, *distinct, members.iter().map(|r| value_in(r, c)).collect()),
                        },
                    })
                    .collect(),
            );
        }
    }
    out.sort();
    Ok(out)
}
