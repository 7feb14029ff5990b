use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::QueryError;
use crate::engine::{AggFn, CmpOp, Value};

/// Keywords that end an expression list or identify unsupported syntax;
/// they are never accepted as bare aliases.
const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "GROUP", "BY", "AS", "ON", "JOIN", "LEFT",
    "RIGHT", "INNER", "OUTER", "FULL", "CROSS", "NATURAL", "IN", "BETWEEN", "LIKE", "EXISTS",
    "HAVING", "ORDER", "LIMIT", "UNION", "INTERSECT", "EXCEPT", "DISTINCT", "CAST", "IS", "NULL",
];

pub fn parse_statement(src: &str) -> Result<Statement, QueryError> {
    let mut p = Parser::new(src)?;
    let stmt = p.statement()?;
    p.eat_sym(";");
    p.expect_eof()?;
    Ok(stmt)
}

/// Splits a `;`-separated script and parses each statement.
pub fn parse_script(src: &str) -> Result<Vec<Statement>, QueryError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    loop {
        while p.eat_sym(";") {}
        if p.at_eof() {
            break;
        }
        out.push(p.statement()?);
        if !p.eat_sym(";") {
            p.expect_eof()?;
            break;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, QueryError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, QueryError> {
        let t = self.peek();
        Err(QueryError::Parse {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn unsupported<T>(&self, construct: impl Into<String>) -> Result<T, QueryError> {
        let t = self.peek();
        Err(QueryError::Unsupported {
            construct: construct.into(),
            line: t.line,
            col: t.col,
        })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected {kw}, found {}", describe(&self.peek().tok)))
        }
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek().tok, Tok::Sym(s) if s == sym)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), QueryError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.err(format!("expected '{sym}', found {}", describe(&self.peek().tok)))
        }
    }

    fn expect_eof(&self) -> Result<(), QueryError> {
        if self.at_eof() {
            return Ok(());
        }
        self.check_unsupported_keyword()?;
        self.err(format!("unexpected {}", describe(&self.peek().tok)))
    }

    fn check_unsupported_keyword(&self) -> Result<(), QueryError> {
        const UNSUPPORTED: &[(&str, &str)] = &[
            ("OR", "OR"),
            ("NOT", "NOT"),
            ("JOIN", "explicit JOIN"),
            ("LEFT", "LEFT JOIN"),
            ("RIGHT", "RIGHT JOIN"),
            ("INNER", "explicit JOIN"),
            ("FULL", "FULL JOIN"),
            ("CROSS", "explicit JOIN"),
            ("NATURAL", "explicit JOIN"),
            ("IN", "IN"),
            ("BETWEEN", "BETWEEN"),
            ("LIKE", "LIKE"),
            ("HAVING", "HAVING"),
            ("ORDER", "ORDER BY"),
            ("LIMIT", "LIMIT"),
            ("UNION", "UNION"),
            ("INTERSECT", "INTERSECT"),
            ("EXCEPT", "EXCEPT"),
            ("IS", "IS NULL"),
        ];
        for (kw, name) in UNSUPPORTED {
            if self.is_kw(kw) {
                return self.unsupported(*name);
            }
        }
        for sym in ["+", "-", "*", "/", "%", "|"] {
            if self.is_sym(sym) {
                return self.unsupported("arithmetic");
            }
        }
        Ok(())
    }

    fn ident(&mut self) -> Result<String, QueryError> {
        match &self.peek().tok {
            Tok::Quoted(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            Tok::Ident(s) if !RESERVED.iter().any(|k| s.eq_ignore_ascii_case(k)) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            other => {
                let d = describe(other);
                self.check_unsupported_keyword()?;
                self.err(format!("expected identifier, found {d}"))
            }
        }
    }

    fn statement(&mut self) -> Result<Statement, QueryError> {
        if self.eat_kw("CREATE") {
            if self.eat_kw("VIEW") {
                let name = self.ident()?;
                self.expect_kw("AS")?;
                let body = self.select()?;
                return Ok(Statement::CreateView { name, body });
            }
            let unlogged = self.eat_kw("UNLOGGED");
            self.expect_kw("TABLE")?;
            let name = self.ident()?;
            self.expect_kw("AS")?;
            let body = self.select()?;
            return Ok(Statement::CreateTable {
                name,
                unlogged,
                body,
            });
        }
        if self.eat_kw("DROP") {
            let kind = if self.eat_kw("VIEW") {
                ObjectKind::View
            } else {
                self.expect_kw("TABLE")?;
                ObjectKind::Table
            };
            if self.eat_kw("IF") {
                self.expect_kw("EXISTS")?;
            }
            let name = self.ident()?;
            return Ok(Statement::Drop { kind, name });
        }
        if self.is_kw("SELECT") {
            return Ok(Statement::Select(self.select()?));
        }
        self.err(format!("expected a statement, found {}", describe(&self.peek().tok)))
    }

    fn select(&mut self) -> Result<SelectStmt, QueryError> {
        self.expect_kw("SELECT")?;
        if self.is_kw("DISTINCT") {
            return self.unsupported("SELECT DISTINCT");
        }
        let mut items = vec![self.select_item()?];
        while self.eat_sym(",") {
            items.push(self.select_item()?);
        }
        self.expect_kw("FROM")?;
        let mut from = vec![self.from_item()?];
        while self.eat_sym(",") {
            from.push(self.from_item()?);
        }
        let mut conditions = Vec::new();
        if self.eat_kw("WHERE") {
            conditions.push(self.condition()?);
            while self.eat_kw("AND") {
                conditions.push(self.condition()?);
            }
        }
        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            group_by.push(self.column()?);
            while self.eat_sym(",") {
                group_by.push(self.column()?);
            }
        }
        self.check_unsupported_keyword()?;
        Ok(SelectStmt {
            items,
            from,
            conditions,
            group_by,
        })
    }

    fn alias(&mut self) -> Result<Option<String>, QueryError> {
        if self.eat_kw("AS") {
            return Ok(Some(self.ident()?));
        }
        Ok(None)
    }

    fn select_item(&mut self) -> Result<SelectExpr, QueryError> {
        if self.eat_sym("*") {
            return Ok(SelectExpr::Star);
        }
        if let Tok::Number(n) = &self.peek().tok {
            if n == "1" {
                self.bump();
                return Ok(SelectExpr::One);
            }
        }
        if let Tok::Ident(name) = &self.peek().tok {
            if let Some(func) = AggFn::parse(name) {
                if self.peek_at(1) == &Tok::Sym("(") {
                    self.bump();
                    self.bump();
                    let distinct = self.eat_kw("DISTINCT");
                    let arg = if !distinct && self.eat_sym("*") {
                        if func != AggFn::Count {
                            return self.err(format!("{func}(*) is not valid"));
                        }
                        None
                    } else {
                        Some(self.operand_expr()?)
                    };
                    self.expect_sym(")")?;
                    let alias = self.alias()?;
                    return Ok(SelectExpr::Aggregate {
                        func,
                        arg,
                        distinct,
                        alias,
                    });
                }
            }
        }
        let operand = self.operand_expr()?;
        let alias = self.alias()?;
        Ok(SelectExpr::Column { operand, alias })
    }

    fn from_item(&mut self) -> Result<FromItem, QueryError> {
        if self.is_sym("(") {
            return self.unsupported("subquery");
        }
        let table = self.ident()?;
        let alias = if self.eat_kw("AS") {
            Some(self.ident()?)
        } else if matches!(&self.peek().tok, Tok::Ident(s) if !RESERVED.iter().any(|k| s.eq_ignore_ascii_case(k)))
            || matches!(self.peek().tok, Tok::Quoted(_))
        {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(FromItem { table, alias })
    }

    fn column(&mut self) -> Result<ColumnName, QueryError> {
        let first = self.ident()?;
        if self.eat_sym(".") {
            let name = self.ident()?;
            Ok(ColumnName {
                qualifier: Some(first),
                name,
            })
        } else {
            Ok(ColumnName {
                qualifier: None,
                name: first,
            })
        }
    }

    /// Operand followed by a check that no arithmetic operator trails it.
    fn operand_expr(&mut self) -> Result<Operand, QueryError> {
        let op = self.operand()?;
        for sym in ["+", "-", "*", "/", "%", "|"] {
            if self.is_sym(sym) {
                return self.unsupported("arithmetic");
            }
        }
        Ok(op)
    }

    fn operand(&mut self) -> Result<Operand, QueryError> {
        if self.is_sym("(") {
            if matches!(self.peek_at(1), Tok::Ident(s) if s.eq_ignore_ascii_case("SELECT")) {
                return self.unsupported("subquery");
            }
            return self.unsupported("parenthesized expression");
        }
        if self.is_kw("CAST") {
            self.bump();
            self.expect_sym("(")?;
            let col = self.column()?;
            self.expect_kw("AS")?;
            let ty = self.ident()?;
            if !ty.eq_ignore_ascii_case("INTEGER") && !ty.eq_ignore_ascii_case("INT") {
                return self.unsupported(format!("CAST to {ty}"));
            }
            self.expect_sym(")")?;
            return Ok(Operand::Cast(col));
        }
        let negative = self.eat_sym("-");
        match self.peek().tok.clone() {
            Tok::Number(n) => {
                self.bump();
                let text = if negative { format!("-{n}") } else { n };
                let value = if let Ok(i) = text.parse::<i64>() {
                    Value::Int(i)
                } else {
                    match text.parse::<f64>() {
                        Ok(f) => Value::Float(f),
                        Err(_) => return self.err(format!("bad number '{text}'")),
                    }
                };
                Ok(Operand::Literal(value))
            }
            _ if negative => self.unsupported("arithmetic"),
            Tok::Str(s) => {
                self.bump();
                Ok(Operand::Literal(Value::Str(s)))
            }
            _ => Ok(Operand::Column(self.column()?)),
        }
    }

    fn condition(&mut self) -> Result<Condition, QueryError> {
        if self.eat_kw("EXISTS") {
            self.expect_sym("(")?;
            let inner = self.select()?;
            self.expect_sym(")")?;
            return Ok(Condition::Exists(Box::new(inner)));
        }
        if self.is_kw("NOT") {
            return self.unsupported("NOT");
        }
        let left = self.operand_expr()?;
        let op = match self.peek().tok {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") | Tok::Sym("<>") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => {
                self.check_unsupported_keyword()?;
                return self.err(format!("expected comparison operator, found {}", describe(&self.peek().tok)));
            }
        };
        self.bump();
        let right = self.operand_expr()?;
        Ok(Condition::Compare { left, op, right })
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Quoted(s) => format!("\"{s}\""),
        Tok::Number(s) => format!("number {s}"),
        Tok::Str(s) => format!("string '{s}'"),
        Tok::Sym(s) => format!("'{s}'"),
        Tok::Eof => "end of input".into(),
    }
}
