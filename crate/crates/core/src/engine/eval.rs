use std::collections::HashSet;

use super::ops::{AggregateSpec, Executor};
use super::relation::{Database, Relation};
use super::EngineError;
use crate::acyclic::JoinTree;
use crate::query::{Atom, ClassId, NormalizedCQ, OutputItem};

/// Reads an atom's base table, applies its filters and renames attributes
/// to their class names. Two attributes of the same class collapse into
/// one column after an equality check.
pub fn scan_atom(atom: &Atom, db: &Database, ex: &mut Executor) -> Result<Relation, EngineError> {
    let base = db.get(&atom.table)?;
    let filtered = ex.apply_filter(base, &atom.filters)?;
    let mut keep: Vec<usize> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut same: Vec<(usize, usize)> = Vec::new();
    let mut seen: Vec<ClassId> = Vec::new();
    for (attr, class) in &atom.columns {
        let col = filtered.require(attr)?;
        match seen.iter().position(|c| c == class) {
            Some(first) => same.push((keep[first], col)),
            None => {
                seen.push(*class);
                keep.push(col);
                names.push(class.name());
            }
        }
    }
    let rows = filtered
        .into_rows()
        .into_iter()
        .filter(|r| same.iter().all(|&(a, b)| r[a] == r[b]))
        .map(|r| keep.iter().map(|&c| r[c].clone()).collect())
        .collect();
    Relation::new(atom.alias.clone(), names, rows)
}

/// Applies the query's grouping/aggregation or enumeration projection to a
/// relation over class attributes, producing the named output columns.
pub fn finalize(rel: &Relation, cq: &NormalizedCQ, ex: &mut Executor) -> Result<Relation, EngineError> {
    let names: Vec<String> = cq.output.iter().map(|o| o.name().to_string()).collect();
    if cq.aggregate {
        let grouping: Vec<String> = cq.group_by.iter().map(|c| c.name()).collect();
        let aggs: Vec<AggregateSpec> = cq
            .output
            .iter()
            .filter_map(|o| match o {
                OutputItem::Aggregate {
                    func,
                    class,
                    distinct,
                    name,
                    ..
                } => Some(AggregateSpec {
                    func: *func,
                    attribute: class.map(|c| c.name()),
                    distinct: *distinct,
                    output: name.clone(),
                }),
                OutputItem::Column { .. } => None,
            })
            .collect();
        let grouped = ex.group_aggregate(rel, &grouping, &aggs)?;
        let sources: Vec<String> = cq
            .output
            .iter()
            .map(|o| match o {
                OutputItem::Column { class, .. } => class.name(),
                OutputItem::Aggregate { name, .. } => name.clone(),
            })
            .collect();
        ex.project_as(&grouped, &sources, &names)
            .map(|r| r.with_name("result"))
    } else {
        let sources: Vec<String> = cq
            .output
            .iter()
            .map(|o| o.class().expect("enumeration items carry a class").name())
            .collect();
        ex.project_as(rel, &sources, &names).map(|r| r.with_name("result"))
    }
}

/// Conventional evaluation: filters, left-deep natural joins in FROM order,
/// then aggregation or projection.
pub fn evaluate_baseline(cq: &NormalizedCQ, db: &Database, ex: &mut Executor) -> Result<Relation, EngineError> {
    let mut atoms = cq.atoms.iter();
    let first = atoms.next().ok_or_else(|| EngineError::Load("query has no atoms".into()))?;
    let mut acc = scan_atom(first, db, ex)?;
    for atom in atoms {
        let rel = scan_atom(atom, db, ex)?;
        acc = ex.natural_join(&acc, &rel)?;
    }
    finalize(&acc, cq, ex)
}

fn check_tree(tree: &JoinTree, cq: &NormalizedCQ) -> Result<(), EngineError> {
    tree.check_connectedness(cq)
        .map_err(|e| EngineError::InvalidJoinTree(e.to_string()))
}

/// Node relations after the bottom-up semi-join pass.
pub fn semi_join_up(
    tree: &JoinTree,
    cq: &NormalizedCQ,
    db: &Database,
    ex: &mut Executor,
) -> Result<Vec<Relation>, EngineError> {
    check_tree(tree, cq)?;
    let mut nodes = cq
        .atoms
        .iter()
        .map(|a| scan_atom(a, db, ex))
        .collect::<Result<Vec<_>, _>>()?;
    for n in tree.post_order() {
        for &c in tree.children(n) {
            nodes[n] = ex.semi_join(&nodes[n], &nodes[c])?;
        }
    }
    Ok(nodes)
}

/// Node relations after both semi-join passes (the full reducer). Every
/// remaining tuple takes part in at least one answer of the join.
pub fn full_reduce(
    tree: &JoinTree,
    cq: &NormalizedCQ,
    db: &Database,
    ex: &mut Executor,
) -> Result<Vec<Relation>, EngineError> {
    let mut nodes = semi_join_up(tree, cq, db, ex)?;
    for n in tree.pre_order() {
        for &c in tree.children(n) {
            nodes[c] = ex.semi_join(&nodes[c], &nodes[n])?;
        }
    }
    Ok(nodes)
}

/// Yannakakis-style evaluation along `tree`. For 0MA trees only the
/// bottom-up semi-join pass runs and the answer is computed from the root.
pub fn evaluate_yannakakis(
    tree: &JoinTree,
    cq: &NormalizedCQ,
    db: &Database,
    ex: &mut Executor,
) -> Result<Relation, EngineError> {
    if tree.oma {
        let nodes = semi_join_up(tree, cq, db, ex)?;
        return finalize(&nodes[tree.root()], cq, ex);
    }
    let nodes = full_reduce(tree, cq, db, ex)?;
    let output: HashSet<String> = cq.output_classes().iter().map(|c| c.name()).collect();
    let mut results: Vec<Option<Relation>> = vec![None; nodes.len()];
    for n in tree.post_order() {
        let mut acc = nodes[n].clone();
        for &c in tree.children(n) {
            let child = results[c].take().expect("children are joined before parents");
            acc = ex.natural_join(&acc, &child)?;
        }
        let upper: HashSet<String> = tree
            .parent(n)
            .map(|p| cq.atoms[p].classes().iter().map(|c| c.name()).collect())
            .unwrap_or_default();
        let keep: Vec<String> = acc
            .schema()
            .iter()
            .filter(|a| output.contains(*a) || upper.contains(*a))
            .cloned()
            .collect();
        if keep.len() < acc.arity() {
            acc = ex.project(&acc, &keep)?;
        }
        results[n] = Some(acc);
    }
    let root = results[tree.root()].take().expect("root evaluated");
    finalize(&root, cq, ex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acyclic::analyze;
    use crate::engine::Value;
    use crate::query::{normalize, parse_query, Catalog};

    fn chain_db() -> Database {
        let mut db = Database::new();
        db.insert(Relation::from_ints("R", &["a", "b"], &[&[1, 1], &[2, 2], &[3, 3]]).unwrap())
            .unwrap();
        db.insert(Relation::from_ints("S", &["b", "c"], &[&[1, 10], &[1, 11], &[4, 40]]).unwrap())
            .unwrap();
        db.insert(Relation::from_ints("T", &["c", "d"], &[&[10, 100], &[12, 120]]).unwrap())
            .unwrap();
        db
    }

    fn cq(sql: &str, db: &Database) -> NormalizedCQ {
        normalize(&parse_query(sql).unwrap(), &Catalog::from_db(db)).unwrap()
    }

    #[test]
    fn chain_enumeration_both_strategies() {
        let db = chain_db();
        let q = cq("SELECT R.a, R.b, S.c, T.d FROM R, S, T WHERE R.b = S.b AND S.c = T.c", &db);
        let base = evaluate_baseline(&q, &db, &mut Executor::new()).unwrap();
        assert_eq!(base.rows(), &[vec![Value::Int(1), Value::Int(1), Value::Int(10), Value::Int(100)]]);
        let (tree, _) = analyze(&q).unwrap();
        let yann = evaluate_yannakakis(&tree, &q, &db, &mut Executor::new()).unwrap();
        assert!(yann.multiset_eq(&base));
    }

    #[test]
    fn chain_zero_materialization() {
        let db = chain_db();
        let q = cq("SELECT MIN(R.a) FROM R, S, T WHERE R.b = S.b AND S.c = T.c", &db);
        let (tree, _) = analyze(&q).unwrap();
        let mut ex = Executor::new();
        let nodes = semi_join_up(&tree, &q, &db, &mut Executor::new()).unwrap();
        assert_eq!(nodes[1].len(), 1);
        assert_eq!(nodes[0].len(), 1);
        let out = evaluate_yannakakis(&tree, &q, &db, &mut ex).unwrap();
        assert_eq!(out.rows(), &[vec![Value::Int(1)]]);
        assert_eq!(ex.counter.joins, 0);
        assert_eq!(ex.counter.semijoins, 2);
        let base = evaluate_baseline(&q, &db, &mut Executor::new()).unwrap();
        assert!(base.multiset_eq(&out));
    }

    #[test]
    fn single_relation_query() {
        let db = chain_db();
        let q = cq("SELECT MAX(R.b) FROM R WHERE R.a <= 2", &db);
        let mut ex = Executor::new();
        let out = evaluate_baseline(&q, &db, &mut ex).unwrap();
        assert_eq!(out.rows(), &[vec![Value::Int(2)]]);
        assert_eq!(ex.counter.joins, 0);
        let (tree, _) = analyze(&q).unwrap();
        let mut ey = Executor::new();
        assert!(evaluate_yannakakis(&tree, &q, &db, &mut ey).unwrap().multiset_eq(&out));
        assert_eq!((ey.counter.joins, ey.counter.semijoins), (0, 0));
    }

    #[test]
    fn invalid_tree_is_rejected() {
        let db = chain_db();
        let q = cq("SELECT R.a FROM R, S, T WHERE R.b = S.b AND S.c = T.c", &db);
        let bad = JoinTree::from_parents(vec![Some(2), Some(2), None]).unwrap();
        assert!(matches!(
            evaluate_yannakakis(&bad, &q, &db, &mut Executor::new()),
            Err(EngineError::InvalidJoinTree(_))
        ));
    }

    #[test]
    fn intra_atom_equality_collapses_columns() {
        let mut db = Database::new();
        db.insert(Relation::from_ints("E", &["x", "y"], &[&[1, 1], &[1, 2], &[3, 3]]).unwrap())
            .unwrap();
        let q = cq("SELECT e.x FROM E e WHERE e.x = e.y", &db);
        let out = evaluate_baseline(&q, &db, &mut Executor::new()).unwrap();
        assert_eq!(out.sorted_rows(), vec![vec![Value::Int(1)], vec![Value::Int(3)]]);
    }

    #[test]
    fn grouped_aggregate_matches() {
        let db = chain_db();
        let q = cq("SELECT S.b, COUNT(*) FROM R, S WHERE R.b = S.b GROUP BY S.b", &db);
        let base = evaluate_baseline(&q, &db, &mut Executor::new()).unwrap();
        assert_eq!(base.rows(), &[vec![Value::Int(1), Value::Int(2)]]);
        let (tree, oma) = analyze(&q).unwrap();
        assert!(!oma.is_0ma);
        let yann = evaluate_yannakakis(&tree, &q, &db, &mut Executor::new()).unwrap();
        assert!(yann.multiset_eq(&base));
    }
}
