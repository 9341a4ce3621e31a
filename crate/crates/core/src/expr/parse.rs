use super::{Expr, Func};
use crate::error::{Error, Result};

/// Identifiers visible to an expression: chart coordinates and parameters.
pub struct Scope<'a> {
    coords: &'a [String],
    params: &'a [String],
}

impl<'a> Scope<'a> {
    pub fn new(coords: &'a [String], params: &'a [String]) -> Self {
        Scope { coords, params }
    }

    fn resolve(&self, name: &str) -> Option<Expr> {
        if let Some(i) = self.coords.iter().position(|c| c == name) {
            return Some(Expr::Coord(i));
        }
        self.params
            .iter()
            .any(|p| p == name)
            .then(|| Expr::Param(name.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str, line0: usize, col0: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (line0, col0);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let start_col = col;
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            let value: f64 = lexeme.parse().map_err(|_| Error::Parse {
                line,
                col: start_col,
                msg: format!("malformed number `{lexeme}`"),
            })?;
            col += i - start;
            out.push(Token {
                tok: Tok::Num(value),
                line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line,
                col: start_col,
            });
            continue;
        }
        if "+-*/^()".contains(c) {
            out.push(Token {
                tok: Tok::Op(c),
                line,
                col,
            });
            col += 1;
            i += 1;
            continue;
        }
        return Err(Error::Parse {
            line,
            col,
            msg: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

struct Parser<'s, 'a> {
    toks: Vec<Token>,
    pos: usize,
    scope: &'s Scope<'a>,
}

impl Parser<'_, '_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::Parse {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::End => "end of expression".to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_close()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let here = &self.toks[self.pos];
                let (line, col) = (here.line, here.col);
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::Op('(') {
                        return self.error(format!("expected `(` after function `{name}`"));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_close()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if *self.peek() == Tok::Op('(') {
                    return Err(Error::Parse {
                        line,
                        col,
                        msg: format!("unknown function `{name}`"),
                    });
                }
                self.scope
                    .resolve(&name)
                    .ok_or(Error::UndeclaredParameter { name, line, col })
            }
            _ => self.error(format!("expected a value, found {}", self.describe())),
        }
    }

    fn expect_close(&mut self) -> Result<()> {
        if *self.peek() != Tok::Op(')') {
            return self.error(format!("expected `)`, found {}", self.describe()));
        }
        self.pos += 1;
        Ok(())
    }
}

/// Parses one expression. `line` and `col` locate the first character of
/// `text` within its enclosing document for error messages.
pub fn parse_expr(text: &str, scope: &Scope<'_>, line: usize, col: usize) -> Result<Expr> {
    let toks = tokenize(text, line, col)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        scope,
    };
    let e = parser.expr()?;
    if *parser.peek() != Tok::End {
        return parser.error(format!("unexpected {}", parser.describe()));
    }
    Ok(e)
}
