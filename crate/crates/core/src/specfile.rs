//! The `qespec 1` geometry file format.
//!
//! ```text
//! qespec 1
//! name lim_product
//! param m = 2
//! chart {
//!   signature riemannian
//!   coord phi 0 6.283185307179586 periodic
//!   coord x -1 1
//!   coord y 0.5 1.5
//! }
//! fields {
//!   g phi phi = 1
//!   g x x = 1/(m*y^2)
//!   g y y = 1/(m*y^2)
//!   X phi = m
//! }
//! expect {
//!   lambda = -m
//!   m = m
//! }
//! ```
//!
//! Statements end at a newline or `;`, and `#` starts a comment. The full
//! grammar is in `docs/qespec.md`.

use std::sync::Arc;

use crate::catalog::{Expected, GeometryEntry};
use crate::chart::{Chart, Coordinate, Signature};
use crate::error::{Error, Result};
use crate::expr::{num, parse_expr, Expr, Func, Scope};
use crate::field::TensorField;
use crate::jet::MAX_DIM;
use crate::tensor::Geometry;

/// Keys accepted in an `expect` block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectKey {
    Lambda,
    M,
    Mu,
    CosmologicalConstant,
    Y,
}

impl ExpectKey {
    pub const ALL: [ExpectKey; 5] = [
        ExpectKey::Lambda,
        ExpectKey::M,
        ExpectKey::Mu,
        ExpectKey::CosmologicalConstant,
        ExpectKey::Y,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ExpectKey::Lambda => "lambda",
            ExpectKey::M => "m",
            ExpectKey::Mu => "mu",
            ExpectKey::CosmologicalConstant => "Lambda",
            ExpectKey::Y => "Y",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.keyword() == s)
    }
}

/// Parsed geometry file; expressions still refer to parameters by name.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySpec {
    pub name: String,
    pub params: Vec<(String, f64)>,
    pub signature: Signature,
    pub coords: Vec<Coordinate>,
    /// Metric entries `(i, j, expr)` with `i <= j`; absent entries are zero.
    pub metric: Vec<(usize, usize, Expr)>,
    pub x: Vec<(usize, Expr)>,
    pub f: Option<Expr>,
    pub y: Option<Expr>,
    pub expect: Vec<(ExpectKey, Expr)>,
}

#[derive(Clone, Copy)]
struct Pos {
    line: usize,
    col: usize,
}

fn parse_error<T>(pos: Pos, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    })
}

/// A statement: its words with positions, and the raw text after `=`.
struct Stmt {
    words: Vec<(String, Pos)>,
    rhs: Option<(String, Pos)>,
    pos: Pos,
}

fn split_statements(text: &str) -> Vec<Stmt> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let code = raw.split('#').next().unwrap_or("");
        let mut start = 0;
        for piece in code.split(';') {
            let col0 = code[..start].chars().count() + 1;
            start += piece.len() + 1;
            if piece.trim().is_empty() {
                continue;
            }
            let (head, rhs) = match piece.find('=') {
                Some(k) => {
                    let rhs_col = col0 + piece[..k + 1].chars().count();
                    (&piece[..k], Some((piece[k + 1..].to_string(), Pos { line, col: rhs_col })))
                }
                None => (piece, None),
            };
            let mut words = Vec::new();
            let mut col = col0;
            let mut current = String::new();
            let mut current_col = col0;
            for ch in head.chars() {
                if ch.is_whitespace() {
                    if !current.is_empty() {
                        words.push((std::mem::take(&mut current), Pos { line, col: current_col }));
                    }
                } else {
                    if current.is_empty() {
                        current_col = col;
                    }
                    current.push(ch);
                }
                col += 1;
            }
            if !current.is_empty() {
                words.push((current, Pos { line, col: current_col }));
            }
            let pos = words.first().map(|w| w.1).unwrap_or(Pos { line, col: col0 });
            out.push(Stmt { words, rhs, pos });
        }
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_number(s: &str) -> Option<f64> {
    let body = s.strip_prefix('-').unwrap_or(s);
    let ok = !body.is_empty()
        && body.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '.')
        && body.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'));
    if !ok {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(PartialEq)]
enum Block {
    Top,
    Chart,
    Fields,
    Expect,
}

struct RawField {
    kind: char,
    targets: Vec<(String, Pos)>,
    rhs: (String, Pos),
    pos: Pos,
}

/// Parses a geometry file into its declarative form.
pub fn parse_spec_text(text: &str) -> Result<GeometrySpec> {
    let stmts = split_statements(text);
    let mut it = stmts.into_iter();
    let header = it.next();
    match &header {
        Some(s) if s.words.len() == 2 && s.words[0].0 == "qespec" && s.rhs.is_none() => {
            if s.words[1].0 != "1" {
                return parse_error(s.words[1].1, format!("unsupported version `{}`", s.words[1].0));
            }
        }
        Some(s) => return parse_error(s.pos, "expected header `qespec 1`"),
        None => return parse_error(Pos { line: 1, col: 1 }, "empty file; expected header `qespec 1`"),
    }

    let mut name: Option<String> = None;
    let mut params: Vec<(String, f64)> = Vec::new();
    let mut signature: Option<Signature> = None;
    let mut coords: Vec<Coordinate> = Vec::new();
    let mut fields: Vec<RawField> = Vec::new();
    let mut expects: Vec<(ExpectKey, (String, Pos))> = Vec::new();
    let mut seen_chart = false;
    let mut seen_fields = false;
    let mut seen_expect = false;
    let mut block = Block::Top;
    let mut last_pos = Pos { line: 1, col: 1 };

    for s in it {
        last_pos = s.pos;
        let words: Vec<&str> = s.words.iter().map(|w| w.0.as_str()).collect();
        if words == ["}"] && s.rhs.is_none() {
            if block == Block::Top {
                return parse_error(s.pos, "unmatched `}`");
            }
            block = Block::Top;
            continue;
        }
        match block {
            Block::Top => match words.as_slice() {
                ["name", n] if s.rhs.is_none() => {
                    if name.is_some() {
                        return parse_error(s.pos, "duplicate `name`");
                    }
                    if !is_ident(n) {
                        return parse_error(s.words[1].1, format!("invalid name `{n}`"));
                    }
                    name = Some(n.to_string());
                }
                ["param", p] => {
                    let Some((rhs, rpos)) = &s.rhs else {
                        return parse_error(s.pos, "expected `param NAME = NUMBER`");
                    };
                    check_new_ident(p, s.words[1].1, &params, &coords)?;
                    let value = parse_number(rhs.trim()).map_or_else(
                        || parse_error(*rpos, format!("expected a number, found `{}`", rhs.trim())),
                        Ok,
                    )?;
                    params.push((p.to_string(), value));
                }
                [kw @ ("chart" | "fields" | "expect"), "{"] if s.rhs.is_none() => {
                    let seen = match *kw {
                        "chart" => &mut seen_chart,
                        "fields" => &mut seen_fields,
                        _ => &mut seen_expect,
                    };
                    if *seen {
                        return parse_error(s.pos, format!("duplicate `{kw}` block"));
                    }
                    *seen = true;
                    block = match *kw {
                        "chart" => Block::Chart,
                        "fields" => Block::Fields,
                        _ => Block::Expect,
                    };
                }
                _ => {
                    return parse_error(
                        s.pos,
                        format!("unexpected statement `{}`", words.join(" ")),
                    )
                }
            },
            Block::Chart => {
                if s.rhs.is_some() {
                    return parse_error(s.pos, "unexpected `=` in chart block");
                }
                match words.as_slice() {
                    ["signature", sig] => {
                        if signature.is_some() {
                            return parse_error(s.pos, "duplicate `signature`");
                        }
                        signature = Some(match *sig {
                            "riemannian" => Signature::Riemannian,
                            "lorentzian" => Signature::Lorentzian,
                            other => {
                                return parse_error(
                                    s.words[1].1,
                                    format!("unknown signature `{other}`"),
                                )
                            }
                        });
                    }
                    ["coord", c, lo, hi, rest @ ..] => {
                        check_new_ident(c, s.words[1].1, &params, &coords)?;
                        let lo_v = parse_number(lo).map_or_else(
                            || parse_error(s.words[2].1, format!("expected a number, found `{lo}`")),
                            Ok,
                        )?;
                        let hi_v = parse_number(hi).map_or_else(
                            || parse_error(s.words[3].1, format!("expected a number, found `{hi}`")),
                            Ok,
                        )?;
                        let periodic = match rest {
                            [] => false,
                            ["periodic"] => true,
                            [other, ..] => {
                                return parse_error(
                                    s.words[4].1,
                                    format!("unexpected `{other}` after coordinate range"),
                                )
                            }
                        };
                        if lo_v >= hi_v {
                            return parse_error(s.words[2].1, format!("empty range [{lo}, {hi}]"));
                        }
                        if coords.len() == MAX_DIM {
                            return parse_error(s.pos, format!("more than {MAX_DIM} coordinates"));
                        }
                        coords.push(Coordinate {
                            name: c.to_string(),
                            lo: lo_v,
                            hi: hi_v,
                            periodic,
                        });
                    }
                    _ => {
                        return parse_error(
                            s.pos,
                            format!("unexpected chart statement `{}`", words.join(" ")),
                        )
                    }
                }
            }
            Block::Fields => {
                let Some(rhs) = s.rhs.clone() else {
                    return parse_error(s.pos, "expected `=` in field statement");
                };
                let (kind, arity) = match words.first() {
                    Some(&"g") => ('g', 2),
                    Some(&"X") => ('X', 1),
                    Some(&"f") => ('f', 0),
                    Some(&"Y") => ('Y', 0),
                    _ => {
                        return parse_error(
                            s.pos,
                            format!("unknown field `{}`", words.first().unwrap_or(&"")),
                        )
                    }
                };
                if words.len() != arity + 1 {
                    return parse_error(
                        s.pos,
                        format!("field `{kind}` takes {arity} coordinate name(s)"),
                    );
                }
                fields.push(RawField {
                    kind,
                    targets: s.words[1..].to_vec(),
                    rhs,
                    pos: s.pos,
                });
            }
            Block::Expect => {
                let Some(rhs) = s.rhs.clone() else {
                    return parse_error(s.pos, "expected `KEY = expr` in expect block");
                };
                let key = match words.as_slice() {
                    [k] => ExpectKey::from_keyword(k),
                    _ => None,
                }
                .map_or_else(
                    || parse_error(s.pos, format!("unknown expectation `{}`", words.join(" "))),
                    Ok,
                )?;
                if expects.iter().any(|(k, _)| *k == key) {
                    return parse_error(s.pos, format!("duplicate expectation `{}`", key.keyword()));
                }
                expects.push((key, rhs));
            }
        }
    }
    if block != Block::Top {
        return parse_error(last_pos, "unterminated block; expected `}`");
    }
    let name = name.map_or_else(|| parse_error(last_pos, "missing `name`"), Ok)?;
    if !seen_chart || coords.is_empty() {
        return parse_error(last_pos, "missing chart block with at least one `coord`");
    }
    if !seen_fields {
        return parse_error(last_pos, "missing fields block");
    }

    let coord_names: Vec<String> = coords.iter().map(|c| c.name.clone()).collect();
    let param_names: Vec<String> = params.iter().map(|p| p.0.clone()).collect();
    let scope = Scope::new(&coord_names, &param_names);
    let const_scope = Scope::new(&[], &param_names);
    let index_of = |w: &(String, Pos)| -> Result<usize> {
        coord_names
            .iter()
            .position(|c| *c == w.0)
            .map_or_else(|| parse_error(w.1, format!("unknown coordinate `{}`", w.0)), Ok)
    };

    let mut metric: Vec<(usize, usize, Expr)> = Vec::new();
    let mut x: Vec<(usize, Expr)> = Vec::new();
    let mut f = None;
    let mut y = None;
    for raw in &fields {
        let e = parse_expr(&raw.rhs.0, &scope, raw.rhs.1.line, raw.rhs.1.col)?;
        match raw.kind {
            'g' => {
                let a = index_of(&raw.targets[0])?;
                let b = index_of(&raw.targets[1])?;
                let (i, j) = (a.min(b), a.max(b));
                if metric.iter().any(|(p, q, _)| (*p, *q) == (i, j)) {
                    return parse_error(raw.pos, "duplicate metric component");
                }
                metric.push((i, j, e));
            }
            'X' => {
                let a = index_of(&raw.targets[0])?;
                if x.iter().any(|(p, _)| *p == a) {
                    return parse_error(raw.pos, "duplicate X component");
                }
                x.push((a, e));
            }
            'f' | 'Y' => {
                let slot = if raw.kind == 'f' { &mut f } else { &mut y };
                if slot.is_some() {
                    return parse_error(raw.pos, format!("duplicate field `{}`", raw.kind));
                }
                *slot = Some(e);
            }
            _ => unreachable!(),
        }
    }
    if metric.is_empty() {
        return parse_error(last_pos, "fields block defines no metric component");
    }
    let mut expect = Vec::new();
    for (key, (text, pos)) in expects {
        let e = parse_expr(&text, &const_scope, pos.line, pos.col).map_err(|err| match err {
            Error::UndeclaredParameter { name, line, col } if coord_names.contains(&name) => {
                Error::Parse {
                    line,
                    col,
                    msg: format!("expectation may not depend on coordinate `{name}`"),
                }
            }
            other => other,
        })?;
        expect.push((key, e));
    }

    Ok(GeometrySpec {
        name,
        params,
        signature: signature.unwrap_or(Signature::Riemannian),
        coords,
        metric,
        x,
        f,
        y,
        expect,
    })
}

fn check_new_ident(
    name: &str,
    pos: Pos,
    params: &[(String, f64)],
    coords: &[Coordinate],
) -> Result<()> {
    if !is_ident(name) {
        return parse_error(pos, format!("invalid identifier `{name}`"));
    }
    if Func::from_name(name).is_some() {
        return parse_error(pos, format!("`{name}` is a function name"));
    }
    if params.iter().any(|p| p.0 == name) || coords.iter().any(|c| c.name == name) {
        return parse_error(pos, format!("`{name}` is already declared"));
    }
    Ok(())
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl GeometrySpec {
    /// Canonical text form; [`parse_spec_text`] maps it back to `self`.
    pub fn emit(&self) -> String {
        let names: Vec<String> = self.coords.iter().map(|c| c.name.clone()).collect();
        let mut out = String::from("qespec 1\n");
        out.push_str(&format!("name {}\n", self.name));
        for (p, v) in &self.params {
            out.push_str(&format!("param {p} = {}\n", fmt_num(*v)));
        }
        out.push_str("chart {\n");
        out.push_str(&format!("  signature {}\n", self.signature.name()));
        for c in &self.coords {
            out.push_str(&format!(
                "  coord {} {} {}{}\n",
                c.name,
                fmt_num(c.lo),
                fmt_num(c.hi),
                if c.periodic { " periodic" } else { "" }
            ));
        }
        out.push_str("}\nfields {\n");
        for (i, j, e) in &self.metric {
            out.push_str(&format!("  g {} {} = {}\n", names[*i], names[*j], e.display(&names)));
        }
        for (i, e) in &self.x {
            out.push_str(&format!("  X {} = {}\n", names[*i], e.display(&names)));
        }
        if let Some(e) = &self.f {
            out.push_str(&format!("  f = {}\n", e.display(&names)));
        }
        if let Some(e) = &self.y {
            out.push_str(&format!("  Y = {}\n", e.display(&names)));
        }
        out.push_str("}\n");
        if !self.expect.is_empty() {
            out.push_str("expect {\n");
            for (k, e) in &self.expect {
                out.push_str(&format!("  {} = {}\n", k.keyword(), e.display(&names)));
            }
            out.push_str("}\n");
        }
        out
    }

    /// Parameter values after applying `overrides`.
    pub fn resolve_params(&self, overrides: &[(String, f64)]) -> Result<Vec<(String, f64)>> {
        let mut params = self.params.clone();
        for (k, v) in overrides {
            match params.iter_mut().find(|(p, _)| p == k) {
                Some(slot) => slot.1 = *v,
                None => {
                    return Err(Error::UnknownParameter {
                        geometry: self.name.clone(),
                        name: k.clone(),
                    })
                }
            }
        }
        Ok(params)
    }

    /// Binds parameters, builds fields and probes them on the chart interior.
    pub fn instantiate(&self, overrides: &[(String, f64)]) -> Result<GeometryEntry> {
        let params = self.resolve_params(overrides)?;
        let lookup = |name: &str| params.iter().find(|(p, _)| p == name).map(|(_, v)| *v);
        let bind = |e: &Expr| -> Result<Expr> {
            e.bind(&lookup).map_err(|name| Error::UndeclaredParameter { name, line: 0, col: 0 })
        };
        let chart = Arc::new(Chart::new(self.coords.clone(), self.signature)?);
        let n = chart.dim();

        let mut g = vec![num(0.0); n * n];
        for (i, j, e) in &self.metric {
            let b = bind(e)?;
            g[i * n + j] = b.clone();
            g[j * n + i] = b;
        }
        let metric = TensorField::symmetric(chart.clone(), g)?;
        let x = if self.x.is_empty() {
            None
        } else {
            let mut comps = vec![num(0.0); n];
            for (i, e) in &self.x {
                comps[*i] = bind(e)?;
            }
            Some(TensorField::covector(chart.clone(), comps)?)
        };
        let f = self.f.as_ref().map(|e| TensorField::scalar(chart.clone(), bind(e)?)).transpose()?;
        let y = self.y.as_ref().map(|e| TensorField::scalar(chart.clone(), bind(e)?)).transpose()?;

        let mut expected = Expected::default();
        for (key, e) in &self.expect {
            let v = bind(e)?.eval(&[]);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("expectation `{}`", key.keyword())));
            }
            let slot = match key {
                ExpectKey::Lambda => &mut expected.lambda,
                ExpectKey::M => &mut expected.m,
                ExpectKey::Mu => &mut expected.mu,
                ExpectKey::CosmologicalConstant => &mut expected.cosmological,
                ExpectKey::Y => &mut expected.y,
            };
            *slot = Some(v);
        }

        probe(&chart, &metric, [&x, &f, &y])?;

        let entry = GeometryEntry {
            name: self.name.clone(),
            params,
            chart,
            metric,
            x,
            f,
            y,
            expected,
            matter: None,
            quadrature: None,
            anchor: String::new(),
            summary: String::new(),
            notes: Vec::new(),
            spec: self.clone(),
        };
        Ok(entry.with_default_quadrature())
    }
}

/// Evaluates every field at `3^dim` interior cell centres.
fn probe(chart: &Chart, metric: &TensorField, others: [&Option<TensorField>; 3]) -> Result<()> {
    let n = chart.dim();
    let all = vec![true; n];
    let grid = chart.grid(3, &all, 0.0);
    for k in 0..grid.len() {
        let p = grid.point(k);
        let g = metric.jets(&p, 0)?;
        Geometry::from_jets(g, &p, chart.signature())?;
        for field in others.iter().copied().flatten() {
            field.values(&p)?;
        }
    }
    Ok(())
}

/// Parses and instantiates a geometry file with its declared parameters.
pub fn parse_spec(text: &str) -> Result<GeometryEntry> {
    parse_spec_text(text)?.instantiate(&[])
}
