//! Syntax tree for the statement grammar. The input dialect is a subset of
//! it; rewriter output additionally uses `CREATE`, `DROP`, `EXISTS`, `CAST`
//! and `SELECT *`.

use std::fmt;

use crate::engine::{AggFn, CmpOp, Value};

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnName {
    pub qualifier: Option<String>,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Column(ColumnName),
    /// `CAST(column AS INTEGER)`
    Cast(ColumnName),
    Literal(Value),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SelectExpr {
    Star,
    /// `SELECT 1`, as used inside `EXISTS`.
    One,
    Column {
        operand: Operand,
        alias: Option<String>,
    },
    Aggregate {
        func: AggFn,
        arg: Option<Operand>,
        distinct: bool,
        alias: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FromItem {
    pub table: String,
    pub alias: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Condition {
    Compare {
        left: Operand,
        op: CmpOp,
        right: Operand,
    },
    Exists(Box<SelectStmt>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectStmt {
    pub items: Vec<SelectExpr>,
    pub from: Vec<FromItem>,
    pub conditions: Vec<Condition>,
    pub group_by: Vec<ColumnName>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectKind {
    View,
    Table,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Statement {
    CreateView {
        name: String,
        body: SelectStmt,
    },
    CreateTable {
        name: String,
        unlogged: bool,
        body: SelectStmt,
    },
    Select(SelectStmt),
    Drop {
        kind: ObjectKind,
        name: String,
    },
}

impl SelectStmt {
    /// Names read by this statement, including inside `EXISTS`.
    pub fn referenced_tables(&self) -> Vec<String> {
        let mut out: Vec<String> = self.from.iter().map(|f| f.table.clone()).collect();
        for cond in &self.conditions {
            if let Condition::Exists(inner) = cond {
                out.extend(inner.referenced_tables());
            }
        }
        out
    }
}

impl Statement {
    pub fn referenced_tables(&self) -> Vec<String> {
        match self {
            Statement::CreateView { body, .. }
            | Statement::CreateTable { body, .. }
            | Statement::Select(body) => body.referenced_tables(),
            Statement::Drop { .. } => Vec::new(),
        }
    }

    pub fn defined_name(&self) -> Option<&str> {
        match self {
            Statement::CreateView { name, .. } | Statement::CreateTable { name, .. } => Some(name),
            _ => None,
        }
    }
}

fn write_ident(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    let plain = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$');
    if plain {
        f.write_str(name)
    } else {
        write!(f, "\"{}\"", name.replace('"', "\"\""))
    }
}

impl fmt::Display for ColumnName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(q) = &self.qualifier {
            write_ident(f, q)?;
            f.write_str(".")?;
        }
        write_ident(f, &self.name)
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Column(c) => write!(f, "{c}"),
            Operand::Cast(c) => write!(f, "CAST({c} AS INTEGER)"),
            Operand::Literal(v) => f.write_str(&v.to_sql()),
        }
    }
}

fn write_alias(f: &mut fmt::Formatter<'_>, alias: &Option<String>) -> fmt::Result {
    if let Some(a) = alias {
        f.write_str(" AS ")?;
        write_ident(f, a)?;
    }
    Ok(())
}

impl fmt::Display for SelectExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectExpr::Star => f.write_str("*"),
            SelectExpr::One => f.write_str("1"),
            SelectExpr::Column { operand, alias } => {
                write!(f, "{operand}")?;
                write_alias(f, alias)
            }
            SelectExpr::Aggregate {
                func,
                arg,
                distinct,
                alias,
            } => {
                write!(f, "{func}(")?;
                if *distinct {
                    f.write_str("DISTINCT ")?;
                }
                match arg {
                    Some(a) => write!(f, "{a})")?,
                    None => f.write_str("*)")?,
                }
                write_alias(f, alias)
            }
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Compare { left, op, right } => write!(f, "{left} {op} {right}"),
            Condition::Exists(inner) => write!(f, "EXISTS ({inner})"),
        }
    }
}

impl fmt::Display for SelectStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{item}")?;
        }
        f.write_str(" FROM ")?;
        for (i, item) in self.from.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write_ident(f, &item.table)?;
            write_alias(f, &item.alias)?;
        }
        for (i, cond) in self.conditions.iter().enumerate() {
            f.write_str(if i == 0 { " WHERE " } else { " AND " })?;
            write!(f, "{cond}")?;
        }
        for (i, col) in self.group_by.iter().enumerate() {
            f.write_str(if i == 0 { " GROUP BY " } else { ", " })?;
            write!(f, "{col}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::CreateView { name, body } => {
                f.write_str("CREATE VIEW ")?;
                write_ident(f, name)?;
                write!(f, " AS {body}")
            }
            Statement::CreateTable { name, unlogged, body } => {
                f.write_str(if *unlogged { "CREATE UNLOGGED TABLE " } else { "CREATE TABLE " })?;
                write_ident(f, name)?;
                write!(f, " AS {body}")
            }
            Statement::Select(body) => write!(f, "{body}"),
            Statement::Drop { kind, name } => {
                f.write_str(match kind {
                    ObjectKind::View => "DROP VIEW ",
                    ObjectKind::Table => "DROP TABLE ",
                })?;
                write_ident(f, name)
            }
        }
    }
}
