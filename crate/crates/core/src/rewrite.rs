//! Translation of a query and its join tree into a sequence of SQL
//! statements that forces semi-join evaluation, and an interpreter that
//! runs such sequences on the in-memory engine.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acyclic::JoinTree;
use crate::engine::{AggFn, AggregateSpec, CmpOp, Database, EngineError, Executor, Predicate, Relation};
use crate::query::ast::{ColumnName, Condition, FromItem, ObjectKind, Operand, SelectExpr, SelectStmt, Statement};
use crate::query::{parse_statement, ClassId, NormalizedCQ, OutputItem, QueryError};

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("invalid join tree: {0}")]
    InvalidJoinTree(String),
    #[error("statement '{name}' does not re-parse: {source}")]
    Malformed {
        name: String,
        #[source]
        source: QueryError,
    },
    #[error("statement '{statement}' reads '{name}' before it is defined")]
    UndefinedReference { statement: String, name: String },
    #[error("{0}")]
    Structure(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatementKind {
    CreateView,
    CreateTable,
    FinalSelect,
    Drop,
}

/// One output column of an aggregation or projection step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FinishItem {
    Column {
        source: String,
        name: String,
    },
    Aggregate {
        func: AggFn,
        source: Option<String>,
        distinct: bool,
        name: String,
    },
}

/// Grouping plus output columns applied to one relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Finish {
    pub aggregate: bool,
    pub group_by: Vec<String>,
    pub items: Vec<FinishItem>,
}

/// What a statement computes, in engine terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Operation {
    /// Filtered base table; `equal` lists attribute pairs that must agree.
    Scan {
        table: String,
        filters: Vec<Predicate>,
        equal: Vec<(String, String)>,
    },
    /// `source ⋉ partner` with `source.a = partner.b` for every pair,
    /// optionally followed by a finishing step.
    SemiJoin {
        source: String,
        partner: String,
        on: Vec<(String, String)>,
        finish: Option<Finish>,
    },
    /// Renames `node` attributes to class names, joins the children on
    /// shared classes and keeps `keep`.
    Join {
        node: String,
        rename: Vec<(String, String)>,
        children: Vec<String>,
        keep: Vec<String>,
    },
    Aggregate {
        source: String,
        finish: Finish,
    },
    Read {
        source: String,
    },
    Drop {
        name: String,
    },
}

impl Operation {
    fn reads(&self) -> Vec<&str> {
        match self {
            Operation::Scan { .. } | Operation::Drop { .. } => Vec::new(),
            Operation::SemiJoin { source, partner, .. } => vec![source, partner],
            Operation::Join { node, children, .. } => {
                let mut v = vec![node.as_str()];
                v.extend(children.iter().map(String::as_str));
                v
            }
            Operation::Aggregate { source, .. } | Operation::Read { source } => vec![source],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewriteStatement {
    pub kind: StatementKind,
    pub name: String,
    pub sql: String,
    pub op: Operation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatementSequence {
    pub statements: Vec<RewriteStatement>,
}

impl StatementSequence {
    /// Statements without the trailing cleanup.
    pub fn body(&self) -> impl Iterator<Item = &RewriteStatement> {
        self.statements.iter().filter(|s| s.kind != StatementKind::Drop)
    }

    pub fn to_sql(&self, with_drops: bool) -> String {
        self.statements
            .iter()
            .filter(|s| with_drops || s.kind != StatementKind::Drop)
            .map(|s| format!("{};\n", s.sql))
            .collect()
    }

    /// Re-parses every statement and checks that intermediates are
    /// defined before use and dropped exactly once.
    pub fn check_well_formed(&self, base_tables: &HashSet<String>) -> Result<(), RewriteError> {
        let mut defined: HashSet<String> = HashSet::new();
        let mut created: Vec<String> = Vec::new();
        let mut dropped: Vec<String> = Vec::new();
        let mut finals = 0;
        for s in &self.statements {
            let parsed = parse_statement(&s.sql).map_err(|source| RewriteError::Malformed {
                name: s.name.clone(),
                source,
            })?;
            for t in parsed.referenced_tables() {
                if !defined.contains(&t) && !base_tables.contains(&t) {
                    return Err(RewriteError::UndefinedReference {
                        statement: s.name.clone(),
                        name: t,
                    });
                }
            }
            match (&parsed, s.kind) {
                (Statement::CreateView { name, .. }, StatementKind::CreateView)
                | (Statement::CreateTable { name, .. }, StatementKind::CreateTable) => {
                    if !defined.insert(name.clone()) {
                        return Err(RewriteError::Structure(format!("'{name}' created twice")));
                    }
                    created.push(name.clone());
                }
                (Statement::Select(_), StatementKind::FinalSelect) => finals += 1,
                (Statement::Drop { name, .. }, StatementKind::Drop) => {
                    defined.remove(name);
                    dropped.push(name.clone());
                }
                _ => {
                    return Err(RewriteError::Structure(format!(
                        "statement '{}' does not match its kind",
                        s.name
                    )))
                }
            }
        }
        if finals != 1 {
            return Err(RewriteError::Structure(format!("{finals} final selects")));
        }
        if !dropped.is_empty() {
            created.reverse();
            if created != dropped {
                return Err(RewriteError::Structure("drops do not mirror creates".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RewriteOptions {
    /// Emit `UNLOGGED` for table creations.
    pub unlogged: bool,
}

impl Default for RewriteOptions {
    fn default() -> Self {
        RewriteOptions { unlogged: true }
    }
}

fn col(qualifier: Option<&str>, name: &str) -> ColumnName {
    ColumnName {
        qualifier: qualifier.map(str::to_string),
        name: name.to_string(),
    }
}

fn column_operand(qualifier: Option<&str>, name: &str) -> Operand {
    Operand::Column(col(qualifier, name))
}

fn equals(left: Operand, right: Operand) -> Condition {
    Condition::Compare {
        left,
        op: CmpOp::Eq,
        right,
    }
}

fn from(table: &str) -> Vec<FromItem> {
    vec![FromItem {
        table: table.to_string(),
        alias: None,
    }]
}

fn expr_name(i: usize) -> String {
    format!("EXPR${i}")
}

struct Builder<'a> {
    cq: &'a NormalizedCQ,
    tree: &'a JoinTree,
    opts: RewriteOptions,
    out: Vec<RewriteStatement>,
}

impl<'a> Builder<'a> {
    fn label(&self, node: usize) -> String {
        format!("E{}", node + 1)
    }

    fn push(&mut self, kind: StatementKind, name: String, stmt: Statement, op: Operation) {
        self.out.push(RewriteStatement {
            kind,
            name,
            sql: stmt.to_string(),
            op,
        });
    }

    fn create_table(&self, name: &str, body: SelectStmt) -> Statement {
        Statement::CreateTable {
            name: name.to_string(),
            unlogged: self.opts.unlogged,
            body,
        }
    }

    /// Attribute of `node` representing `class` (the first one if the
    /// atom holds the class twice).
    fn attr(&self, node: usize, class: ClassId) -> &'a str {
        self.cq.atoms[node]
            .attribute_of(class)
            .expect("class belongs to the atom")
    }

    fn shared(&self, a: usize, b: usize) -> Vec<ClassId> {
        let other = self.cq.atoms[b].classes();
        self.cq.atoms[a]
            .classes()
            .into_iter()
            .filter(|c| other.contains(c))
            .collect()
    }

    fn view(&mut self, node: usize) -> String {
        let atom = &self.cq.atoms[node];
        let name = self.label(node);
        let mut conditions: Vec<Condition> = atom
            .filters
            .iter()
            .map(|p| {
                let c = col(Some(&atom.table), &p.attribute);
                Condition::Compare {
                    left: if p.cast_int { Operand::Cast(c) } else { Operand::Column(c) },
                    op: p.op,
                    right: Operand::Literal(p.literal.clone()),
                }
            })
            .collect();
        let mut equal = Vec::new();
        for (i, (attr, class)) in atom.columns.iter().enumerate() {
            if let Some((first, _)) = atom.columns[..i].iter().find(|(_, c)| c == class) {
                conditions.push(equals(
                    column_operand(Some(&atom.table), first),
                    column_operand(Some(&atom.table), attr),
                ));
                equal.push((first.clone(), attr.clone()));
            }
        }
        let body = SelectStmt {
            items: vec![SelectExpr::Star],
            from: vec![FromItem {
                table: atom.table.clone(),
                alias: Some(atom.table.clone()),
            }],
            conditions,
            group_by: Vec::new(),
        };
        let op = Operation::Scan {
            table: atom.table.clone(),
            filters: atom.filters.clone(),
            equal,
        };
        self.push(
            StatementKind::CreateView,
            name.clone(),
            Statement::CreateView {
                name: name.clone(),
                body,
            },
            op,
        );
        name
    }

    /// Semi-join statement `source ⋉ partner`, where `source` holds the
    /// attributes of atom `s` and `partner` those of atom `p`.
    fn semi_join_stmt(
        &self,
        source: &str,
        s: usize,
        partner: &str,
        p: usize,
        finish: Option<&Finish>,
    ) -> (SelectStmt, Vec<(String, String)>) {
        let on: Vec<(String, String)> = self
            .shared(s, p)
            .into_iter()
            .map(|c| (self.attr(s, c).to_string(), self.attr(p, c).to_string()))
            .collect();
        let inner = SelectStmt {
            items: vec![SelectExpr::One],
            from: from(partner),
            conditions: on
                .iter()
                .map(|(a, b)| equals(column_operand(Some(source), a), column_operand(Some(partner), b)))
                .collect(),
            group_by: Vec::new(),
        };
        let (items, group_by) = match finish {
            Some(f) => finish_select(f),
            None => (vec![SelectExpr::Star], Vec::new()),
        };
        let body = SelectStmt {
            items,
            from: from(source),
            conditions: vec![Condition::Exists(Box::new(inner))],
            group_by,
        };
        (body, on)
    }

    /// Top-down semi-join pass; `reduced[n]` is the current relation of `n`.
    fn top_down(&mut self, reduced: &mut [String]) {
        for n in self.tree.pre_order() {
            for c in self.tree.children(n).to_vec() {
                let name = format!("{}_TD", reduced[c]);
                let (body, on) = self.semi_join_stmt(&reduced[c], c, &reduced[n], n, None);
                let op = Operation::SemiJoin {
                    source: reduced[c].clone(),
                    partner: reduced[n].clone(),
                    on,
                    finish: None,
                };
                let stmt = self.create_table(&name, body);
                self.push(StatementKind::CreateTable, name.clone(), stmt, op);
                reduced[c] = name;
            }
        }
    }

    /// Bottom-up join pass; returns the name of the root's join result,
    /// whose columns are class names.
    fn joins(&mut self, reduced: &[String]) -> String {
        let output: HashSet<ClassId> = self.cq.output_classes().into_iter().collect();
        let mut results: Vec<Option<(String, Vec<ClassId>)>> = vec![None; reduced.len()];
        for n in self.tree.post_order() {
            let node_classes = self.cq.atoms[n].classes();
            let mut schema: Vec<ClassId> = node_classes.clone();
            let mut sources: Vec<Option<usize>> = vec![None; schema.len()];
            let mut children: Vec<(String, Vec<ClassId>)> = Vec::new();
            for &c in self.tree.children(n) {
                let child = results[c].take().expect("children are joined before parents");
                for class in &child.1 {
                    if !schema.contains(class) {
                        schema.push(*class);
                        sources.push(Some(children.len()));
                    }
                }
                children.push(child);
            }
            let upper: Vec<ClassId> = self
                .tree
                .parent(n)
                .map(|p| self.cq.atoms[p].classes())
                .unwrap_or_default();
            let mut keep: Vec<usize> = (0..schema.len())
                .filter(|&i| output.contains(&schema[i]) || upper.contains(&schema[i]))
                .collect();
            if keep.is_empty() {
                keep.push(0);
            }

            let node_rel = &reduced[n];
            let name = format!("{node_rel}_J");
            let items: Vec<SelectExpr> = keep
                .iter()
                .map(|&i| {
                    let class = schema[i];
                    match sources[i] {
                        None => SelectExpr::Column {
                            operand: column_operand(Some(node_rel), self.attr(n, class)),
                            alias: Some(class.name()),
                        },
                        Some(ci) => SelectExpr::Column {
                            operand: column_operand(Some(&children[ci].0), &class.name()),
                            alias: None,
                        },
                    }
                })
                .collect();
            let mut conditions = Vec::new();
            for (ci, (child, cols)) in children.iter().enumerate() {
                for class in cols {
                    if node_classes.contains(class) {
                        conditions.push(equals(
                            column_operand(Some(node_rel), self.attr(n, *class)),
                            column_operand(Some(child), &class.name()),
                        ));
                    } else if let Some(first) = (0..schema.len()).find(|&i| schema[i] == *class) {
                        if sources[first] != Some(ci) {
                            let owner = &children[sources[first].expect("class from a child")].0;
                            conditions.push(equals(
                                column_operand(Some(owner), &class.name()),
                                column_operand(Some(child), &class.name()),
                            ));
                        }
                    }
                }
            }
            let mut from_items = from(node_rel);
            from_items.extend(children.iter().map(|(c, _)| FromItem {
                table: c.clone(),
                alias: None,
            }));
            let body = SelectStmt {
                items,
                from: from_items,
                conditions,
                group_by: Vec::new(),
            };
            let op = Operation::Join {
                node: node_rel.clone(),
                rename: node_classes
                    .iter()
                    .map(|&c| (self.attr(n, c).to_string(), c.name()))
                    .collect(),
                children: children.iter().map(|(c, _)| c.clone()).collect(),
                keep: keep.iter().map(|&i| schema[i].name()).collect(),
            };
            let stmt = self.create_table(&name, body);
            self.push(StatementKind::CreateTable, name.clone(), stmt, op);
            results[n] = Some((name, keep.iter().map(|&i| schema[i]).collect()));
        }
        results[self.tree.root()].take().expect("root joined").0
    }

    fn finish_over(&self, attr: impl Fn(ClassId) -> String) -> Finish {
        let items = self
            .cq
            .output
            .iter()
            .map(|o| match o {
                OutputItem::Column { class, name, .. } => FinishItem::Column {
                    source: attr(*class),
                    name: name.clone(),
                },
                OutputItem::Aggregate {
                    func,
                    class,
                    distinct,
                    name,
                    ..
                } => FinishItem::Aggregate {
                    func: *func,
                    source: class.map(&attr),
                    distinct: *distinct,
                    name: name.clone(),
                },
            })
            .collect();
        Finish {
            aggregate: self.cq.aggregate,
            group_by: self.cq.group_by.iter().map(|&c| attr(c)).collect(),
            items,
        }
    }
}

fn finish_select(f: &Finish) -> (Vec<SelectExpr>, Vec<ColumnName>) {
    let items = f
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| match item {
            FinishItem::Column { source, .. } => SelectExpr::Column {
                operand: column_operand(None, source),
                alias: Some(expr_name(i)),
            },
            FinishItem::Aggregate {
                func, source, distinct, ..
            } => SelectExpr::Aggregate {
                func: *func,
                arg: source.as_deref().map(|s| column_operand(None, s)),
                distinct: *distinct,
                alias: Some(expr_name(i)),
            },
        })
        .collect();
    let group_by = f.group_by.iter().map(|g| col(None, g)).collect();
    (items, group_by)
}

/// Statement sequence evaluating `cq` along `tree`. Leaves become filtered
/// views, inner nodes semi-join tables named by concatenating node labels
/// in creation order. For 0MA trees the aggregate is computed by the last
/// statement over the root; otherwise top-down semi-join tables and
/// bottom-up join tables follow and the final select aggregates or
/// projects their result. Cleanup drops are appended.
pub fn rewrite(tree: &JoinTree, cq: &NormalizedCQ, opts: RewriteOptions) -> Result<StatementSequence, RewriteError> {
    tree.check_connectedness(cq)
        .map_err(|e| RewriteError::InvalidJoinTree(e.to_string()))?;
    if tree.len() != cq.atoms.len() {
        return Err(RewriteError::InvalidJoinTree(format!(
            "tree has {} nodes for {} atoms",
            tree.len(),
            cq.atoms.len()
        )));
    }
    let mut b = Builder {
        cq,
        tree,
        opts,
        out: Vec::new(),
    };
    let root = tree.root();
    let mut reduced: Vec<String> = vec![String::new(); cq.atoms.len()];
    if tree.oma {
        let finish = b.finish_over(|c| guard_attr(cq, root, c));
        bottom_up(&mut b, root, &mut reduced, Some(&finish));
        let top = reduced[root].clone();
        let body = SelectStmt {
            items: vec![SelectExpr::Star],
            from: from(&top),
            conditions: Vec::new(),
            group_by: Vec::new(),
        };
        b.push(
            StatementKind::FinalSelect,
            "final".into(),
            Statement::Select(body),
            Operation::Read { source: top },
        );
    } else {
        bottom_up(&mut b, root, &mut reduced, None);
        b.top_down(&mut reduced);
        let top = b.joins(&reduced);
        let finish = b.finish_over(|c| c.name());
        let (items, group_by) = finish_select(&finish);
        let body = SelectStmt {
            items,
            from: from(&top),
            conditions: Vec::new(),
            group_by,
        };
        b.push(
            StatementKind::FinalSelect,
            "final".into(),
            Statement::Select(body),
            Operation::Aggregate { source: top, finish },
        );
    }

    let drops: Vec<(ObjectKind, String)> = b
        .out
        .iter()
        .rev()
        .filter_map(|s| match s.kind {
            StatementKind::CreateView => Some((ObjectKind::View, s.name.clone())),
            StatementKind::CreateTable => Some((ObjectKind::Table, s.name.clone())),
            _ => None,
        })
        .collect();
    for (kind, name) in drops {
        b.push(
            StatementKind::Drop,
            name.clone(),
            Statement::Drop {
                kind,
                name: name.clone(),
            },
            Operation::Drop { name },
        );
    }
    Ok(StatementSequence { statements: b.out })
}

fn guard_attr(cq: &NormalizedCQ, node: usize, class: ClassId) -> String {
    cq.atoms[node]
        .attribute_of(class)
        .expect("0MA output lies in the guard")
        .to_string()
}

/// Bottom-up semi-join pass recording the reduced relation of every node.
/// `finish` is attached to the last statement over `node`.
fn bottom_up(b: &mut Builder<'_>, node: usize, reduced: &mut [String], finish: Option<&Finish>) {
    let mut acc = b.view(node);
    let children = b.tree.children(node).to_vec();
    for (i, &c) in children.iter().enumerate() {
        bottom_up(b, c, reduced, None);
        let child = reduced[c].clone();
        let name = format!("{acc}{child}");
        let fin = if i + 1 == children.len() { finish } else { None };
        let (body, on) = b.semi_join_stmt(&acc, node, &child, c, fin);
        let op = Operation::SemiJoin {
            source: acc.clone(),
            partner: child,
            on,
            finish: fin.cloned(),
        };
        let stmt = b.create_table(&name, body);
        b.push(StatementKind::CreateTable, name.clone(), stmt, op);
        acc = name;
    }
    if let (true, Some(f)) = (children.is_empty(), finish) {
        let name = format!("{acc}_AGG");
        let (items, group_by) = finish_select(f);
        let body = SelectStmt {
            items,
            from: from(&acc),
            conditions: Vec::new(),
            group_by,
        };
        let op = Operation::Aggregate {
            source: acc.clone(),
            finish: f.clone(),
        };
        let stmt = b.create_table(&name, body);
        b.push(StatementKind::CreateTable, name.clone(), stmt, op);
        acc = name;
    }
    reduced[node] = acc;
}

fn run_finish(rel: &Relation, f: &Finish, ex: &mut Executor) -> Result<Relation, EngineError> {
    let names: Vec<String> = f
        .items
        .iter()
        .map(|i| match i {
            FinishItem::Column { name, .. } | FinishItem::Aggregate { name, .. } => name.clone(),
        })
        .collect();
    if !f.aggregate {
        let sources: Vec<String> = f
            .items
            .iter()
            .map(|i| match i {
                FinishItem::Column { source, .. } => source.clone(),
                FinishItem::Aggregate { name, .. } => name.clone(),
            })
            .collect();
        return ex.project_as(rel, &sources, &names);
    }
    let mut aggs = Vec::new();
    let mut sources = Vec::new();
    for (i, item) in f.items.iter().enumerate() {
        match item {
            FinishItem::Column { source, .. } => sources.push(source.clone()),
            FinishItem::Aggregate {
                func, source, distinct, ..
            } => {
                aggs.push(AggregateSpec {
                    func: *func,
                    attribute: source.clone(),
                    distinct: *distinct,
                    output: expr_name(i),
                });
                sources.push(expr_name(i));
            }
        }
    }
    let grouped = ex.group_aggregate(rel, &f.group_by, &aggs)?;
    ex.project_as(&grouped, &sources, &names)
}

/// Executes a statement sequence against `db`. Intermediates live in a
/// private namespace that is discarded on return.
pub fn interpret_sequence(seq: &StatementSequence, db: &Database, ex: &mut Executor) -> Result<Relation, EngineError> {
    let mut space: HashMap<String, Relation> = HashMap::new();
    let mut answer: Option<Relation> = None;
    for s in &seq.statements {
        ex.check_deadline()?;
        for name in s.op.reads() {
            if !space.contains_key(name) {
                return Err(EngineError::UndefinedIntermediate(name.to_string()));
            }
        }
        let rel = match &s.op {
            Operation::Scan { table, filters, equal } => {
                let base = ex.apply_filter(db.get(table)?, filters)?;
                if equal.is_empty() {
                    base
                } else {
                    let pairs = equal
                        .iter()
                        .map(|(a, b)| Ok((base.require(a)?, base.require(b)?)))
                        .collect::<Result<Vec<_>, EngineError>>()?;
                    let rows = base
                        .rows()
                        .iter()
                        .filter(|r| pairs.iter().all(|&(a, b)| r[a] == r[b]))
                        .cloned()
                        .collect();
                    Relation::new(table.clone(), base.schema().to_vec(), rows)?
                }
            }
            Operation::SemiJoin {
                source,
                partner,
                on,
                finish,
            } => {
                let left = &space[source];
                let right = &space[partner];
                let (lk, rk): (Vec<String>, Vec<String>) = on.iter().cloned().unzip();
                let keys = ex.project_as(right, &rk, &lk)?;
                let mut rel = ex.semi_join(left, &keys)?;
                if let Some(f) = finish {
                    rel = run_finish(&rel, f, ex)?;
                }
                rel
            }
            Operation::Join {
                node,
                rename,
                children,
                keep,
            } => {
                let (attrs, names): (Vec<String>, Vec<String>) = rename.iter().cloned().unzip();
                let mut acc = ex.project_as(&space[node], &attrs, &names)?;
                for c in children {
                    acc = ex.natural_join(&acc, &space[c])?;
                }
                ex.project(&acc, keep)?
            }
            Operation::Aggregate { source, finish } => run_finish(&space[source], finish, ex)?,
            Operation::Read { source } => space[source].clone(),
            Operation::Drop { name } => {
                space.remove(name);
                continue;
            }
        };
        if s.kind == StatementKind::FinalSelect {
            answer = Some(rel.with_name("result"));
        } else {
            space.insert(s.name.clone(), rel.with_name(s.name.clone()));
        }
    }
    answer.ok_or_else(|| EngineError::UndefinedIntermediate("final select".into()))
}
