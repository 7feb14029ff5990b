use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{ColumnName, Condition, Operand, SelectExpr, Statement};
use super::parser::parse_statement;
use super::QueryError;
use crate::engine::{AggFn, CmpOp, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub alias: String,
    pub attr: String,
}

impl ColumnRef {
    pub fn new(alias: impl Into<String>, attr: impl Into<String>) -> Self {
        ColumnRef {
            alias: alias.into(),
            attr: attr.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.alias, self.attr)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRef {
    pub table: String,
    pub alias: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SelectItem {
    Column(ColumnRef),
    Aggregate {
        func: AggFn,
        /// `None` for `COUNT(*)`.
        arg: Option<ColumnRef>,
        distinct: bool,
    },
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Column(c) => write!(f, "{c}"),
            SelectItem::Aggregate { func, arg, distinct } => {
                let d = if *distinct { "DISTINCT " } else { "" };
                match arg {
                    Some(a) => write!(f, "{func}({d}{a})"),
                    None => write!(f, "{func}(*)"),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinCond {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub column: ColumnRef,
    pub op: CmpOp,
    pub literal: Value,
}

/// A parsed conjunctive query of the input dialect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub tables: Vec<TableRef>,
    pub select: Vec<SelectItem>,
    pub group_by: Vec<ColumnRef>,
    pub join_conds: Vec<JoinCond>,
    pub filters: Vec<Filter>,
}

impl QuerySpec {
    pub fn is_aggregate(&self) -> bool {
        !self.group_by.is_empty()
            || self
                .select
                .iter()
                .any(|s| matches!(s, SelectItem::Aggregate { .. }))
    }

    pub fn table_of(&self, alias: &str) -> Option<&str> {
        self.tables
            .iter()
            .find(|t| t.alias == alias)
            .map(|t| t.table.as_str())
    }

    /// Distinct `alias.attr` references used in join conditions, in order of
    /// first appearance.
    pub fn join_attributes(&self) -> Vec<ColumnRef> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for jc in &self.join_conds {
            for c in [&jc.left, &jc.right] {
                if seen.insert(c.clone()) {
                    out.push(c.clone());
                }
            }
        }
        out
    }

    /// Checks alias declarations and the grouping rule.
    pub fn validate(&self) -> Result<(), QueryError> {
        let mut aliases = HashSet::new();
        for t in &self.tables {
            if !aliases.insert(t.alias.as_str()) {
                return Err(QueryError::DuplicateAlias(t.alias.clone()));
            }
        }
        let check = |c: &ColumnRef| {
            if aliases.contains(c.alias.as_str()) {
                Ok(())
            } else {
                Err(QueryError::UnknownAlias(c.alias.clone()))
            }
        };
        for item in &self.select {
            match item {
                SelectItem::Column(c) => check(c)?,
                SelectItem::Aggregate { arg: Some(c), .. } => check(c)?,
                SelectItem::Aggregate { arg: None, .. } => {}
            }
        }
        for c in &self.group_by {
            check(c)?;
        }
        for jc in &self.join_conds {
            check(&jc.left)?;
            check(&jc.right)?;
            if jc.left == jc.right {
                return Err(QueryError::Unsupported {
                    construct: format!("self comparison {}", jc.left),
                    line: 0,
                    col: 0,
                });
            }
        }
        for f in &self.filters {
            check(&f.column)?;
        }
        if self.is_aggregate() {
            for item in &self.select {
                if let SelectItem::Column(c) = item {
                    if !self.group_by.contains(c) {
                        return Err(QueryError::NotGrouped(c.to_string()));
                    }
                }
            }
        }
        if self.select.is_empty() || self.tables.is_empty() {
            return Err(QueryError::Parse {
                line: 0,
                col: 0,
                message: "empty SELECT or FROM list".into(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for QuerySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.select.iter().map(|s| s.to_string()).collect();
        writeln!(f, "SELECT {}", items.join(", "))?;
        let tables: Vec<String> = self
            .tables
            .iter()
            .map(|t| format!("{} AS {}", t.table, t.alias))
            .collect();
        write!(f, "FROM {}", tables.join(", "))?;
        let mut conds: Vec<String> = self
            .join_conds
            .iter()
            .map(|j| format!("{} = {}", j.left, j.right))
            .collect();
        conds.extend(
            self.filters
                .iter()
                .map(|fl| format!("{} {} {}", fl.column, fl.op, fl.literal.to_sql())),
        );
        if !conds.is_empty() {
            write!(f, "\nWHERE {}", conds.join("\n  AND "))?;
        }
        if !self.group_by.is_empty() {
            let g: Vec<String> = self.group_by.iter().map(|c| c.to_string()).collect();
            write!(f, "\nGROUP BY {}", g.join(", "))?;
        }
        Ok(())
    }
}

/// Parses one statement of the input dialect.
pub fn parse_query(sql: &str) -> Result<QuerySpec, QueryError> {
    let stmt = match parse_statement(sql)? {
        Statement::Select(s) => s,
        _ => return Err(unsupported("statements other than SELECT")),
    };

    let tables: Vec<TableRef> = stmt
        .from
        .iter()
        .map(|f| TableRef {
            table: f.table.clone(),
            alias: f.alias.clone().unwrap_or_else(|| f.table.clone()),
        })
        .collect();
    let resolve = |c: &ColumnName| -> Result<ColumnRef, QueryError> {
        match &c.qualifier {
            Some(q) => Ok(ColumnRef::new(q, &c.name)),
            None if tables.len() == 1 => Ok(ColumnRef::new(&tables[0].alias, &c.name)),
            None => Err(QueryError::AmbiguousColumn(c.name.clone())),
        }
    };
    let column_operand = |o: &Operand| -> Result<ColumnRef, QueryError> {
        match o {
            Operand::Column(c) => resolve(c),
            Operand::Cast(_) => Err(unsupported("CAST")),
            Operand::Literal(_) => Err(unsupported("literal in SELECT list")),
        }
    };

    let mut select = Vec::new();
    for item in &stmt.items {
        select.push(match item {
            SelectExpr::Star => return Err(unsupported("SELECT *")),
            SelectExpr::One => return Err(unsupported("literal in SELECT list")),
            SelectExpr::Column { operand, .. } => SelectItem::Column(column_operand(operand)?),
            SelectExpr::Aggregate {
                func,
                arg,
                distinct,
                ..
            } => SelectItem::Aggregate {
                func: *func,
                arg: arg.as_ref().map(column_operand).transpose()?,
                distinct: *distinct,
            },
        });
    }

    let mut join_conds = Vec::new();
    let mut filters = Vec::new();
    for cond in &stmt.conditions {
        let Condition::Compare { left, op, right } = cond else {
            return Err(unsupported("EXISTS"));
        };
        match (left, right) {
            (Operand::Column(a), Operand::Column(b)) => {
                if *op != CmpOp::Eq {
                    return Err(unsupported("non-equality join condition"));
                }
                join_conds.push(JoinCond {
                    left: resolve(a)?,
                    right: resolve(b)?,
                });
            }
            (Operand::Column(c), Operand::Literal(v)) => filters.push(Filter {
                column: resolve(c)?,
                op: *op,
                literal: v.clone(),
            }),
            (Operand::Literal(v), Operand::Column(c)) => filters.push(Filter {
                column: resolve(c)?,
                op: op.flipped(),
                literal: v.clone(),
            }),
            (Operand::Cast(_), _) | (_, Operand::Cast(_)) => return Err(unsupported("CAST")),
            _ => return Err(unsupported("comparison between literals")),
        }
    }
    let group_by = stmt.group_by.iter().map(resolve).collect::<Result<_, _>>()?;

    let spec = QuerySpec {
        tables,
        select,
        group_by,
        join_conds,
        filters,
    };
    spec.validate()?;
    Ok(spec)
}

fn unsupported(what: &str) -> QueryError {
    QueryError::Unsupported {
        construct: what.to_string(),
        line: 0,
        col: 0,
    }
}
