//! Scalar expressions over chart coordinates and named parameters.
//!
//! Expressions are produced by the parser in [`parse`] or by the smart
//! constructors below, which fold constants and drop neutral elements so that
//! symbolic derivatives stay small.

mod parse;

pub use parse::{parse_expr, Scope};

use std::fmt;

/// Elementary functions accepted by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Chart coordinate by index.
    Coord(usize),
    /// Named parameter, resolved by [`Expr::bind`].
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parses `text` with the given coordinate and parameter names in scope.
pub fn parse_in(text: &str, coords: &[&str], params: &[&str]) -> crate::error::Result<Expr> {
    let coords: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
    let params: Vec<String> = params.iter().map(|s| s.to_string()).collect();
    parse_expr(text, &Scope::new(&coords, &params), 1, 1)
}

pub fn num(v: f64) -> Expr {
    Expr::Num(v)
}

pub fn coord(i: usize) -> Expr {
    Expr::Coord(i)
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (Expr::Num(x), _) if *x == 0.0 => b,
        (_, Expr::Num(y)) if *y == 0.0 => a,
        (_, Expr::Neg(inner)) => sub(a, (**inner).clone()),
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (Expr::Num(x), _) if *x == 0.0 => neg(b),
        (_, Expr::Num(y)) if *y == 0.0 => a,
        _ if a == b => Expr::Num(0.0),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => Expr::Num(0.0),
        (Expr::Num(x), _) if *x == 1.0 => b,
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (Expr::Num(x), _) if *x == -1.0 => neg(b),
        (_, Expr::Num(y)) if *y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) if *y != 0.0 => Expr::Num(x / y),
        (Expr::Num(x), _) if *x == 0.0 => Expr::Num(0.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x.powf(*y)),
        (_, Expr::Num(y)) if *y == 0.0 => Expr::Num(1.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(f.apply(x)),
        other => Expr::Call(f, Box::new(other)),
    }
}

impl Expr {
    /// Evaluates at a coordinate tuple. Unbound parameters evaluate to NaN.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Coord(i) => x[*i],
            Expr::Param(_) => f64::NAN,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => eval_pow(a.eval(x), b, x),
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Symbolic partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Param(_) => num(0.0),
            Expr::Coord(i) => num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                let first = div(da, (**b).clone());
                if db == num(0.0) {
                    return first;
                }
                sub(
                    first,
                    div(mul((**a).clone(), db), pow((**b).clone(), num(2.0))),
                )
            }
            Expr::Pow(a, b) => {
                let da = a.diff(var);
                if !b.depends_on_coords() {
                    let lowered = pow((**a).clone(), sub((**b).clone(), num(1.0)));
                    return mul(mul((**b).clone(), lowered), da);
                }
                let db = b.diff(var);
                let inner = add(
                    mul(db, call(Func::Log, (**a).clone())),
                    div(mul((**b).clone(), da), (**a).clone()),
                );
                mul(self.clone(), inner)
            }
            Expr::Call(f, a) => {
                let da = a.diff(var);
                if da == num(0.0) {
                    return num(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Sinh => call(Func::Cosh, a),
                    Func::Cosh => call(Func::Sinh, a),
                    Func::Exp => call(Func::Exp, a),
                    Func::Log => return div(da, a),
                    Func::Sqrt => {
                        return div(da, mul(num(2.0), call(Func::Sqrt, a)));
                    }
                };
                mul(outer, da)
            }
        }
    }

    pub fn depends_on_coords(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Coord(_)))
    }

    pub fn depends_on(&self, var: usize) -> bool {
        self.any(&|e| matches!(e, Expr::Coord(i) if *i == var))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Expr::Num(_) | Expr::Coord(_) | Expr::Param(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.any(pred),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.any(pred) || b.any(pred),
        }
    }

    /// Parameter names in first-occurrence order.
    pub fn params(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Expr::Num(_) | Expr::Coord(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_params(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => {
                a.collect_params(out);
                b.collect_params(out);
            }
        }
    }

    /// Replaces parameters by values and folds the resulting constants.
    pub fn bind(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<Expr, String> {
        self.rebuild(&|e| match e {
            Expr::Param(p) => lookup(p).map(Expr::Num).ok_or_else(|| p.clone()),
            other => Ok(other.clone()),
        })
    }

    /// Substitutes every coordinate `i` by `map(i)`.
    pub fn substitute(&self, map: &dyn Fn(usize) -> Expr) -> Expr {
        self.rebuild(&|e| match e {
            Expr::Coord(i) => Ok(map(*i)),
            other => Ok(other.clone()),
        })
        .expect("substitution is infallible")
    }

    fn rebuild(&self, leaf: &dyn Fn(&Expr) -> Result<Expr, String>) -> Result<Expr, String> {
        Ok(match self {
            Expr::Num(_) | Expr::Coord(_) | Expr::Param(_) => leaf(self)?,
            Expr::Neg(a) => neg(a.rebuild(leaf)?),
            Expr::Add(a, b) => add(a.rebuild(leaf)?, b.rebuild(leaf)?),
            Expr::Sub(a, b) => sub(a.rebuild(leaf)?, b.rebuild(leaf)?),
            Expr::Mul(a, b) => mul(a.rebuild(leaf)?, b.rebuild(leaf)?),
            Expr::Div(a, b) => div(a.rebuild(leaf)?, b.rebuild(leaf)?),
            Expr::Pow(a, b) => pow(a.rebuild(leaf)?, b.rebuild(leaf)?),
            Expr::Call(f, a) => call(*f, a.rebuild(leaf)?),
        })
    }

    /// Formats with the given coordinate names, using the fewest parentheses
    /// that [`parse_expr`] needs to recover the same tree.
    pub fn display<'a>(&'a self, coords: &'a [String]) -> Display<'a> {
        Display { expr: self, coords }
    }
}

// Integer exponents use powi so that negative bases stay real.
fn eval_pow(base: f64, exponent: &Expr, x: &[f64]) -> f64 {
    if let Expr::Num(e) = exponent {
        if e.fract() == 0.0 && e.abs() <= 64.0 {
            return base.powi(*e as i32);
        }
        return base.powf(*e);
    }
    base.powf(exponent.eval(x))
}

pub struct Display<'a> {
    expr: &'a Expr,
    coords: &'a [String],
}

// Binding strength: sums 1, products 2, unary minus 3, powers 4, atoms 5.
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 0,
        Expr::Pow(..) => 4,
        _ => 5,
    }
}

impl Display<'_> {
    fn write(&self, e: &Expr, min_level: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lvl = level(e);
        if lvl == 0 {
            // negative literal
            if let Expr::Num(v) = e {
                return write!(f, "(-{})", -v);
            }
        }
        if lvl < min_level {
            write!(f, "(")?;
            self.write(e, 0, f)?;
            return write!(f, ")");
        }
        match e {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Coord(i) => match self.coords.get(*i) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "x{i}"),
            },
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                self.write(a, 3, f)
            }
            Expr::Add(a, b) => {
                self.write(a, 1, f)?;
                write!(f, " + ")?;
                self.write(b, 2, f)
            }
            Expr::Sub(a, b) => {
                self.write(a, 1, f)?;
                write!(f, " - ")?;
                self.write(b, 2, f)
            }
            Expr::Mul(a, b) => {
                self.write(a, 2, f)?;
                write!(f, "*")?;
                self.write(b, 3, f)
            }
            Expr::Div(a, b) => {
                self.write(a, 2, f)?;
                write!(f, "/")?;
                self.write(b, 3, f)
            }
            Expr::Pow(a, b) => {
                self.write(a, 5, f)?;
                write!(f, "^")?;
                self.write(b, 3, f)
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(a, 0, f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, 0, f)
    }
}
