//! Smooth fields on a chart and the two differentiation backends.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{coefficient_count, multi_indices, Jet, MAX_ORDER};

/// How derivatives of field components are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Backend {
    /// Symbolic derivatives of the component expressions.
    Analytic,
    /// Central stencils in coordinate units: fourth order at step `h` for
    /// first derivatives, eighth order at step `max(h, 2e-3)` above that.
    FiniteDifference { h: f64 },
}

impl Backend {
    pub const DEFAULT_STEP: f64 = 1e-4;

    pub fn fd() -> Self {
        Backend::FiniteDifference {
            h: Self::DEFAULT_STEP,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Analytic => "analytic",
            Backend::FiniteDifference { .. } => "fd",
        }
    }

    pub fn step(&self) -> Option<f64> {
        match self {
            Backend::Analytic => None,
            Backend::FiniteDifference { h } => Some(*h),
        }
    }

    /// Default absolute tolerance: `1e-9` analytic, `max(1e-6, 50 h^2)` for
    /// finite differences.
    pub fn tolerance(&self) -> f64 {
        match self {
            Backend::Analytic => 1e-9,
            Backend::FiniteDifference { h } => (50.0 * h * h).max(1e-6),
        }
    }

    /// Largest stencil offset needed for derivatives up to `order`.
    pub fn reach(&self, order: usize) -> f64 {
        match self {
            Backend::Analytic => 0.0,
            Backend::FiniteDifference { h } => match order {
                0 => 0.0,
                1 => 2.0 * h,
                2 => 4.0 * coarse_step(*h),
                _ => 5.0 * coarse_step(*h),
            },
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Analytic => write!(f, "analytic"),
            Backend::FiniteDifference { h } => write!(f, "fd(h={h:e})"),
        }
    }
}

// Higher derivatives divide by a power of the step, so jets of order two and
// above use a floored step with eighth-order stencils to keep both roundoff
// and truncation small.
fn coarse_step(h: f64) -> f64 {
    h.max(2e-3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Valence {
    pub covariant: usize,
    pub contravariant: usize,
}

impl Valence {
    pub const SCALAR: Valence = Valence::new(0, 0);
    pub const COVECTOR: Valence = Valence::new(1, 0);
    pub const BILINEAR: Valence = Valence::new(2, 0);

    pub const fn new(covariant: usize, contravariant: usize) -> Self {
        Valence {
            covariant,
            contravariant,
        }
    }

    pub fn rank(&self) -> usize {
        self.covariant + self.contravariant
    }

    pub fn component_count(&self, dim: usize) -> usize {
        dim.pow(self.rank() as u32)
    }
}

impl fmt::Display for Valence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.covariant, self.contravariant)
    }
}

/// Index symmetry declared by a field of rank two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    None,
    Symmetric,
    Antisymmetric,
}

/// Point evaluation of a field's components, optionally with exact jets.
pub trait FieldSource: Send + Sync {
    fn len(&self) -> usize;

    fn values(&self, p: &[f64]) -> Vec<f64>;

    /// Exact jets, when the source can provide them.
    fn analytic_jets(&self, _p: &[f64], _order: usize) -> Option<Vec<Jet>> {
        None
    }

    /// Whether any component may vary along `axis`.
    fn depends_on(&self, _axis: usize) -> bool {
        true
    }
}

/// One expression with lazily built symbolic derivative tables.
pub struct ExprComponent {
    dim: usize,
    expr: Expr,
    // levels[k]: derivatives for the degree-k monomials, in jet storage order
    levels: [OnceLock<Vec<Expr>>; MAX_ORDER + 1],
}

impl ExprComponent {
    pub fn new(dim: usize, expr: Expr) -> Self {
        ExprComponent {
            dim,
            expr,
            levels: Default::default(),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    fn level(&self, degree: usize) -> &[Expr] {
        self.levels[degree].get_or_init(|| {
            if degree == 0 {
                return vec![self.expr.clone()];
            }
            let all = multi_indices(self.dim, degree);
            let lo = coefficient_count(self.dim, degree - 1);
            let prev_lo = if degree >= 2 {
                coefficient_count(self.dim, degree - 2)
            } else {
                0
            };
            let parents = self.level(degree - 1);
            all[lo..]
                .iter()
                .map(|alpha| {
                    let axis = alpha.iter().position(|&e| e > 0).expect("positive degree");
                    let mut parent = alpha.clone();
                    parent[axis] -= 1;
                    let k = all[prev_lo..lo]
                        .iter()
                        .position(|m| *m == parent)
                        .expect("parent monomial");
                    parents[k].diff(axis)
                })
                .collect()
        })
    }

    fn jet(&self, p: &[f64], order: usize) -> Jet {
        let monomials = multi_indices(self.dim, order);
        let mut coeffs = Vec::with_capacity(monomials.len());
        for degree in 0..=order {
            for e in self.level(degree) {
                coeffs.push(e.eval(p));
            }
        }
        for (c, alpha) in coeffs.iter_mut().zip(&monomials) {
            *c /= factorial(alpha);
        }
        Jet::from_coefficients(self.dim, order, coeffs)
    }
}

fn factorial(alpha: &[u8]) -> f64 {
    alpha
        .iter()
        .map(|&k| (1..=u32::from(k)).product::<u32>() as f64)
        .product()
}

/// Components given by closed-form expressions.
pub struct ExprSource {
    components: Vec<Arc<ExprComponent>>,
}

impl ExprSource {
    pub fn components(&self) -> impl Iterator<Item = &Expr> {
        self.components.iter().map(|c| c.expr())
    }
}

impl FieldSource for ExprSource {
    fn len(&self) -> usize {
        self.components.len()
    }

    fn values(&self, p: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.expr.eval(p)).collect()
    }

    fn analytic_jets(&self, p: &[f64], order: usize) -> Option<Vec<Jet>> {
        let mut out: Vec<Jet> = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let shared = self.components[..i].iter().position(|d| Arc::ptr_eq(c, d));
            let jet = match shared {
                Some(j) => out[j].clone(),
                None => c.jet(p, order),
            };
            out.push(jet);
        }
        Some(out)
    }

    fn depends_on(&self, axis: usize) -> bool {
        self.components.iter().any(|c| c.expr.depends_on(axis))
    }
}

type ValueFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Components given only as point values; differentiable by stencils alone.
pub struct ClosureSource {
    len: usize,
    f: Arc<ValueFn>,
}

impl FieldSource for ClosureSource {
    fn len(&self) -> usize {
        self.len
    }

    fn values(&self, p: &[f64]) -> Vec<f64> {
        (self.f)(p)
    }
}

/// A smooth map from chart points to tensor components, row-major in the
/// covariant indices.
#[derive(Clone)]
pub struct TensorField {
    chart: Arc<Chart>,
    valence: Valence,
    symmetry: Symmetry,
    source: Arc<dyn FieldSource>,
    backend: Backend,
    exprs: Option<Arc<Vec<Expr>>>,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorField")
            .field("dim", &self.chart.dim())
            .field("valence", &self.valence)
            .field("symmetry", &self.symmetry)
            .field("backend", &self.backend)
            .finish()
    }
}

impl TensorField {
    fn from_exprs(
        chart: Arc<Chart>,
        valence: Valence,
        symmetry: Symmetry,
        exprs: Vec<Expr>,
    ) -> Result<Self> {
        let n = chart.dim();
        if exprs.len() != valence.component_count(n) {
            return Err(Error::ValenceMismatch(format!(
                "{} components supplied for valence {valence} in dimension {n}",
                exprs.len()
            )));
        }
        if let Some(name) = exprs.iter().flat_map(Expr::params).next() {
            return Err(Error::Config(format!("unbound parameter `{name}` in field")));
        }
        let mut components: Vec<Arc<ExprComponent>> = Vec::with_capacity(exprs.len());
        for (k, e) in exprs.iter().enumerate() {
            let (i, j) = (k / n.max(1), k % n.max(1));
            if valence.rank() == 2 && symmetry == Symmetry::Symmetric && j < i {
                components.push(components[j * n + i].clone());
            } else {
                components.push(Arc::new(ExprComponent::new(n, e.clone())));
            }
        }
        Ok(TensorField {
            chart,
            valence,
            symmetry,
            source: Arc::new(ExprSource { components }),
            backend: Backend::Analytic,
            exprs: Some(Arc::new(exprs)),
        })
    }

    pub fn scalar(chart: Arc<Chart>, e: Expr) -> Result<Self> {
        Self::from_exprs(chart, Valence::SCALAR, Symmetry::None, vec![e])
    }

    pub fn covector(chart: Arc<Chart>, components: Vec<Expr>) -> Result<Self> {
        Self::from_exprs(chart, Valence::COVECTOR, Symmetry::None, components)
    }

    /// Symmetric `(0,2)` field from a full `n×n` component list; the lower
    /// triangle must mirror the upper one.
    pub fn symmetric(chart: Arc<Chart>, components: Vec<Expr>) -> Result<Self> {
        let n = chart.dim();
        for i in 0..n {
            for j in 0..i {
                if components.get(i * n + j) != components.get(j * n + i) {
                    return Err(Error::ValenceMismatch(format!(
                        "component ({i},{j}) does not mirror ({j},{i})"
                    )));
                }
            }
        }
        Self::from_exprs(chart, Valence::BILINEAR, Symmetry::Symmetric, components)
    }

    /// Two-form from a full `n×n` antisymmetric component list.
    pub fn two_form(chart: Arc<Chart>, components: Vec<Expr>) -> Result<Self> {
        let n = chart.dim();
        for i in 0..n {
            for j in 0..=i {
                let a = &components[i * n + j];
                let b = &components[j * n + i];
                let mirrored = if i == j {
                    a.is_zero()
                } else {
                    *a == crate::expr::neg(b.clone())
                };
                if !mirrored {
                    return Err(Error::ValenceMismatch(format!(
                        "component ({i},{j}) is not minus ({j},{i})"
                    )));
                }
            }
        }
        Self::from_exprs(chart, Valence::BILINEAR, Symmetry::Antisymmetric, components)
    }

    /// Field known only through point values; finite differences only.
    pub fn from_fn(
        chart: Arc<Chart>,
        valence: Valence,
        symmetry: Symmetry,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        let len = valence.component_count(chart.dim());
        TensorField {
            chart,
            valence,
            symmetry,
            source: Arc::new(ClosureSource {
                len,
                f: Arc::new(f),
            }),
            backend: Backend::fd(),
            exprs: None,
        }
    }

    /// Field backed by a custom source.
    pub fn from_source(
        chart: Arc<Chart>,
        valence: Valence,
        symmetry: Symmetry,
        source: Arc<dyn FieldSource>,
        backend: Backend,
    ) -> Self {
        TensorField {
            chart,
            valence,
            symmetry,
            source,
            backend,
            exprs: None,
        }
    }

    pub fn with_backend(&self, backend: Backend) -> Self {
        TensorField {
            backend,
            ..self.clone()
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Component expressions, for fields built from closed forms.
    pub fn exprs(&self) -> Option<&[Expr]> {
        self.exprs.as_deref().map(Vec::as_slice)
    }

    pub fn has_analytic(&self) -> bool {
        self.source.analytic_jets(&self.chart.center(), 0).is_some()
    }

    pub fn depends_on(&self, axis: usize) -> bool {
        self.source.depends_on(axis)
    }

    pub fn values(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.chart.check_interior(p, 0.0)?;
        let v = self.source.values(p);
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("field components at {p:?}")))
        }
    }

    /// Component jets of the requested order at `p`.
    pub fn jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.chart.check_interior(p, self.backend.reach(order))?;
        let jets = match self.backend {
            Backend::Analytic => self.source.analytic_jets(p, order).ok_or_else(|| {
                Error::Backend("field has no closed form; use the fd backend".into())
            })?,
            Backend::FiniteDifference { h } => {
                stencil_jets(&*self.source, &self.chart, p, order, h)?
            }
        };
        if jets.iter().all(Jet::is_finite) {
            Ok(jets)
        } else {
            Err(Error::NonFinite(format!("field derivatives at {p:?}")))
        }
    }
}

const D1: [(i32, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const D2: [(i32, f64); 5] = [
    (-2, -1.0 / 12.0),
    (-1, 16.0 / 12.0),
    (0, -30.0 / 12.0),
    (1, 16.0 / 12.0),
    (2, -1.0 / 12.0),
];

const D1_8: [(i32, f64); 8] = [
    (-4, 1.0 / 280.0),
    (-3, -4.0 / 105.0),
    (-2, 1.0 / 5.0),
    (-1, -4.0 / 5.0),
    (1, 4.0 / 5.0),
    (2, -1.0 / 5.0),
    (3, 4.0 / 105.0),
    (4, -1.0 / 280.0),
];
const D2_8: [(i32, f64); 9] = [
    (-4, -1.0 / 560.0),
    (-3, 8.0 / 315.0),
    (-2, -1.0 / 5.0),
    (-1, 8.0 / 5.0),
    (0, -205.0 / 72.0),
    (1, 8.0 / 5.0),
    (2, -1.0 / 5.0),
    (3, 8.0 / 315.0),
    (4, -1.0 / 560.0),
];
const D3_8: [(i32, f64); 10] = [
    (-5, 41.0 / 6048.0),
    (-4, -1261.0 / 15120.0),
    (-3, 541.0 / 1120.0),
    (-2, -4369.0 / 2520.0),
    (-1, 1669.0 / 720.0),
    (1, -1669.0 / 720.0),
    (2, 4369.0 / 2520.0),
    (3, -541.0 / 1120.0),
    (4, 1261.0 / 15120.0),
    (5, -41.0 / 6048.0),
];

/// Fourth-order central stencils, or eighth-order ones for jets of order two
/// and above.
fn stencil(exponent: u8, high: bool) -> &'static [(i32, f64)] {
    match (exponent, high) {
        (0, _) => &[(0, 1.0)],
        (1, false) => &D1,
        (2, false) => &D2,
        (1, true) => &D1_8,
        (2, true) => &D2_8,
        _ => &D3_8,
    }
}

/// Jets from tensor products of one-dimensional central stencils.
fn stencil_jets(
    source: &dyn FieldSource,
    chart: &Chart,
    p: &[f64],
    order: usize,
    h: f64,
) -> Result<Vec<Jet>> {
    let dim = chart.dim();
    let monomials = multi_indices(dim, order);
    let ncomp = source.len();
    let mut coeffs = vec![vec![0.0; monomials.len()]; ncomp];
    let mut cache: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
    let depends: Vec<bool> = (0..dim).map(|a| source.depends_on(a)).collect();

    for (idx, alpha) in monomials.iter().enumerate() {
        if alpha.iter().zip(&depends).any(|(&e, &d)| e > 0 && !d) {
            continue;
        }
        let degree: usize = alpha.iter().map(|&e| e as usize).sum();
        let high = order >= 2;
        let step = if high { coarse_step(h) } else { h };
        let mut acc = vec![0.0; ncomp];
        let mut offsets = vec![0usize; dim];
        'product: loop {
            let mut weight = 1.0;
            let mut key = Vec::with_capacity(dim);
            let mut q = Vec::with_capacity(dim);
            for axis in 0..dim {
                let (k, w) = stencil(alpha[axis], high)[offsets[axis]];
                weight *= w;
                let x = chart
                    .wrap(axis, p[axis] + f64::from(k) * step)
                    .ok_or_else(|| Error::PointOutOfRange { point: p.to_vec() })?;
                key.push(x.to_bits());
                q.push(x);
            }
            let values = cache.entry(key).or_insert_with(|| source.values(&q));
            for (a, v) in acc.iter_mut().zip(values.iter()) {
                *a += weight * v;
            }
            // advance the mixed-radix counter over stencil taps
            for axis in (0..dim).rev() {
                offsets[axis] += 1;
                if offsets[axis] < stencil(alpha[axis], high).len() {
                    continue 'product;
                }
                offsets[axis] = 0;
            }
            break;
        }
        let scale = step.powi(degree as i32) * factorial(alpha);
        for (c, a) in coeffs.iter_mut().zip(acc) {
            c[idx] = a / scale;
        }
    }
    Ok(coeffs
        .into_iter()
        .map(|c| Jet::from_coefficients(dim, order, c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Coordinate, Signature};
    use crate::expr::{parse_expr, Scope};

    fn plane() -> Arc<Chart> {
        Arc::new(
            Chart::new(
                vec![Coordinate::new("x", -2.0, 2.0), Coordinate::periodic("y", 0.0, 6.0)],
                Signature::Riemannian,
            )
            .unwrap(),
        )
    }

    fn expr(text: &str) -> Expr {
        let coords = vec!["x".to_string(), "y".to_string()];
        parse_expr(text, &Scope::new(&coords, &[]), 1, 1).unwrap()
    }

    #[test]
    fn analytic_and_stencil_jets_agree() {
        let f = TensorField::scalar(plane(), expr("sin(x)*exp(y/3) + x^3*y")).unwrap();
        let p = [0.3, 1.2];
        let exact = f.jets(&p, 3).unwrap().remove(0);
        let fd = f
            .with_backend(Backend::FiniteDifference { h: 1e-3 })
            .jets(&p, 3)
            .unwrap()
            .remove(0);
        for (a, b) in exact.coefficients().iter().zip(fd.coefficients()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn symmetric_components_share_tables() {
        let g = TensorField::symmetric(
            plane(),
            vec![expr("1 + x^2"), expr("x*y"), expr("x*y"), expr("2")],
        )
        .unwrap();
        let j = g.jets(&[0.5, 1.0], 2).unwrap();
        assert_eq!(j[1].coefficients(), j[2].coefficients());
        assert!(TensorField::symmetric(
            plane(),
            vec![expr("1"), expr("x"), expr("y"), expr("1")]
        )
        .is_err());
    }

    #[test]
    fn closure_fields_need_stencils() {
        let f = TensorField::from_fn(plane(), Valence::SCALAR, Symmetry::None, |p| {
            vec![p[0] * p[0]]
        });
        assert!(f.with_backend(Backend::Analytic).jets(&[0.0, 1.0], 1).is_err());
        let j = f.jets(&[0.5, 1.0], 2).unwrap().remove(0);
        assert!((j.partial(&[0, 0]) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn stencils_respect_boundaries_and_wrap() {
        let f = TensorField::scalar(plane(), expr("sin(3.141592653589793*y/3)"))
            .unwrap()
            .with_backend(Backend::fd());
        // periodic axis wraps
        assert!(f.jets(&[0.0, 1e-5], 2).is_ok());
        // non-periodic axis refuses to leave the box
        assert!(matches!(
            f.jets(&[2.0 - 1e-5, 1.0], 2),
            Err(Error::PointOutOfRange { .. })
        ));
    }
}
