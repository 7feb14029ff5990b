use super::QueryError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Double-quoted identifier; never treated as a keyword.
    Quoted(String),
    Number(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const SYMBOLS: &[&str] = &[
    "<=", ">=", "<>", "!=", "=", "<", ">", ",", ".", "(", ")", ";", "*", "+", "-", "/", "%", "|",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, QueryError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize, chars: &[char]| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1, &chars);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    let n = j - i;
                    advance(&mut i, &mut line, &mut col, n, &chars);
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col, 1, &chars);
                    }
                }
            }
            out.push(Token {
                tok: Tok::Number(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '\'' || c == '"' {
            let quote = c;
            advance(&mut i, &mut line, &mut col, 1, &chars);
            let mut text = String::new();
            loop {
                if i >= chars.len() {
                    return Err(QueryError::Parse {
                        line: tl,
                        col: tc,
                        message: "unterminated quoted text".into(),
                    });
                }
                if chars[i] == quote {
                    if chars.get(i + 1) == Some(&quote) {
                        text.push(quote);
                        advance(&mut i, &mut line, &mut col, 2, &chars);
                        continue;
                    }
                    advance(&mut i, &mut line, &mut col, 1, &chars);
                    break;
                }
                text.push(chars[i]);
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            let tok = if quote == '\'' { Tok::Str(text) } else { Tok::Quoted(text) };
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                advance(&mut i, &mut line, &mut col, sym.len(), &chars);
                out.push(Token {
                    tok: Tok::Sym(sym),
                    line: tl,
                    col: tc,
                });
            }
            None => {
                return Err(QueryError::Parse {
                    line: tl,
                    col: tc,
                    message: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_and_kinds() {
        let toks = tokenize("SELECT a.x\n  FROM t -- note\nWHERE a.x >= 'it''s'").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(kinds[0], Tok::Ident("SELECT".into()));
        assert_eq!(kinds[2], Tok::Sym("."));
        assert_eq!(toks[4].line, 2);
        assert_eq!(toks[4].col, 3);
        assert!(kinds.contains(&Tok::Sym(">=")));
        assert!(kinds.contains(&Tok::Str("it's".into())));
        assert_eq!(kinds.last(), Some(&Tok::Eof));
    }

    #[test]
    fn numbers() {
        let toks = tokenize("12 3.5 1e3").unwrap();
        assert_eq!(toks[0].tok, Tok::Number("12".into()));
        assert_eq!(toks[1].tok, Tok::Number("3.5".into()));
        assert_eq!(toks[2].tok, Tok::Number("1e3".into()));
    }

    #[test]
    fn bad_character_reports_position() {
        match tokenize("SELECT\n  #") {
            Err(QueryError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
    }
}
