//! Near-horizon spacetimes: assembly, vacuum residual, general system and
//! the scaling limit.

use std::sync::Arc;

use crate::catalog::GeometryEntry;
use crate::chart::{Chart, Coordinate, Signature};
use crate::error::{Error, Result};
use crate::expr::{coord, div, mul, num, Expr};
use crate::field::{Backend, Symmetry, TensorField, Valence};
use crate::jet::Jet;
use crate::quasi_einstein::{bakry_emery_jets, values, QEProblem, Rows};
use crate::report::{sweep_values, GeometryRef, Sampling, Stats, VerificationReport};
use crate::tensor::{covector_jets, require_same_chart, scalar_jet, Geometry};

pub const ANCHOR_SPACETIME: &str = "near-horizon spacetime metric";
pub const ANCHOR_EINSTEIN: &str = "vacuum Einstein equations";
pub const ANCHOR_EINSTEIN_MATTER: &str = "Einstein equations with matter";
pub const ANCHOR_GENERAL: &str = "general near-horizon equations";
pub const ANCHOR_LIMIT: &str = "near-horizon scaling limit";

/// Range of the radial coordinate on assembled charts; `r = 0` is interior.
pub const R_RANGE: (f64, f64) = (-0.5, 0.5);

/// Near-horizon data `(g, X, Y)` with `λ` and the spacetime constant
/// `Λ = nλ/2`.
#[derive(Clone, Debug)]
pub struct NHGBundle {
    pub base: QEProblem,
    pub y: TensorField,
    pub lambda: f64,
    pub cosmological: f64,
}

impl NHGBundle {
    pub fn new(base: QEProblem, y: TensorField) -> Result<Self> {
        if base.m != 2.0 {
            return Err(Error::Precondition(format!(
                "near-horizon data needs m = 2, got m = {}",
                base.m
            )));
        }
        if y.valence() != Valence::SCALAR {
            return Err(Error::ValenceMismatch("Y must be a function".into()));
        }
        require_same_chart(&y, &base.g)?;
        let lambda = base.lambda;
        let cosmological = base.dim() as f64 * lambda / 2.0;
        Ok(NHGBundle {
            base,
            y,
            lambda,
            cosmological,
        })
    }

    /// Bundle from a catalog entry: its `Y` field, else its constant `Y`.
    pub fn from_entry(entry: &GeometryEntry) -> Result<Self> {
        let base = QEProblem::from_entry(entry)?;
        let y = match (&entry.y, entry.expected.y) {
            (Some(y), _) => y.clone(),
            (None, Some(c)) => TensorField::scalar(entry.chart.clone(), num(c))?
                .with_backend(entry.backend()),
            (None, None) => {
                return Err(Error::Precondition(format!("`{}` declares no Y", entry.name)))
            }
        };
        Self::new(base, y)
    }

    /// Same data with `Y` replaced.
    pub fn with_y(&self, y: TensorField) -> Result<Self> {
        Self::new(self.base.clone(), y)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn geometry(&self) -> &GeometryRef {
        &self.base.geometry
    }
}

/// `(v, r, x^1 .. x^n)` chart over `base`, with `v` periodic on `[0, 1]`.
pub fn spacetime_chart(base: &Chart) -> Result<Arc<Chart>> {
    if base.dim() + 2 > crate::jet::MAX_DIM {
        return Err(Error::Config(format!(
            "a {}-dimensional spacetime exceeds the supported dimension {}",
            base.dim() + 2,
            crate::jet::MAX_DIM
        )));
    }
    let taken = |s: &str| base.coords().iter().any(|c| c.name == s);
    let fresh = |stem: &str| {
        let mut s = stem.to_string();
        while taken(&s) {
            s.push('_');
        }
        s
    };
    let mut coords = vec![
        Coordinate::periodic(&fresh("v"), 0.0, 1.0),
        Coordinate::new(&fresh("r"), R_RANGE.0, R_RANGE.1),
    ];
    coords.extend(base.coords().iter().cloned());
    Ok(Arc::new(Chart::new(coords, Signature::Lorentzian)?))
}

/// Components of `2 dv (dr + r X + r^2 Y dv / 2) + g` from base expressions.
/// Base coordinate `i` becomes spacetime coordinate `i + 2`.
pub fn assemble_exprs(g: &[Expr], x: &[Expr], y: &Expr) -> Vec<Expr> {
    let n = x.len();
    let big = n + 2;
    let lift = |e: &Expr| e.substitute(&|i| coord(i + 2));
    let r = coord(1);
    let mut out = vec![num(0.0); big * big];
    out[0] = mul(mul(r.clone(), r.clone()), lift(y));
    out[1] = num(1.0);
    out[big] = num(1.0);
    for i in 0..n {
        let vi = mul(r.clone(), lift(&x[i]));
        out[i + 2] = vi.clone();
        out[(i + 2) * big] = vi;
        for j in 0..n {
            out[(i + 2) * big + j + 2] = lift(&g[i * n + j]);
        }
    }
    out
}

/// Point values of the assembled metric from base values.
fn assemble_values(g: &[f64], x: &[f64], y: f64, r: f64) -> Vec<f64> {
    let n = x.len();
    let big = n + 2;
    let mut out = vec![0.0; big * big];
    out[0] = r * r * y;
    out[1] = 1.0;
    out[big] = 1.0;
    for i in 0..n {
        out[i + 2] = r * x[i];
        out[(i + 2) * big] = r * x[i];
        for j in 0..n {
            out[(i + 2) * big + j + 2] = g[i * n + j];
        }
    }
    out
}

/// The Lorentzian metric of the bundle on the `(v, r, x)` chart. Closed
/// forms are kept when all inputs have them; otherwise the result is a
/// finite-difference field.
pub fn assemble_nhg(bundle: &NHGBundle) -> Result<TensorField> {
    let base = &bundle.base;
    let chart = spacetime_chart(base.g.chart())?;
    let field = match (base.g.exprs(), base.x.exprs(), bundle.y.exprs()) {
        (Some(g), Some(x), Some(y)) => {
            TensorField::symmetric(chart.clone(), assemble_exprs(g, x, &y[0]))?
                .with_backend(base.backend())
        }
        _ => {
            let (g, x, y) = (base.g.clone(), base.x.clone(), bundle.y.clone());
            let f = TensorField::from_fn(chart.clone(), Valence::BILINEAR, Symmetry::Symmetric, move |p| {
                let q = &p[2..];
                match (g.values(q), x.values(q), y.values(q)) {
                    (Ok(g), Ok(x), Ok(y)) => assemble_values(&g, &x, y[0], p[1]),
                    _ => vec![f64::NAN; p.len() * p.len()],
                }
            });
            match base.backend() {
                Backend::Analytic => f,
                fd => f.with_backend(fd),
            }
        }
    };
    // det 𝐠 = −det g, so degeneracy can only come from the base metric;
    // probe anyway, on a coarse grid through the interior.
    let probe = chart.grid(3, &vec![true; chart.dim()], 0.0);
    for i in 0..probe.len() {
        let p = probe.point(i);
        Geometry::at(&field, &p, 0)?;
    }
    Ok(field)
}

/// `Ric(𝐠) − ½R𝐠 + Λ𝐠 − 𝐓` at `p`.
pub fn einstein_tensor_residual(
    metric: &TensorField,
    cosmological: f64,
    source: Option<&TensorField>,
    p: &[f64],
) -> Result<Vec<f64>> {
    let geo = Geometry::at(metric, p, 2)?;
    let ric = values(&geo.ricci());
    let g = values(geo.metric());
    let r: f64 = {
        let ginv = values(geo.inverse());
        ginv.iter().zip(&ric).map(|(a, b)| a * b).sum()
    };
    let t = match source {
        Some(t) => t.values(p)?,
        None => vec![0.0; g.len()],
    };
    Ok(ric
        .iter()
        .zip(&g)
        .zip(&t)
        .map(|((rc, g), t)| rc - 0.5 * r * g + cosmological * g - t)
        .collect())
}

/// Grid maximum of the Einstein residual: component sup-norm for
/// Lorentzian metrics, orthonormal norm for Riemannian ones.
pub fn einstein_residual(
    metric: &TensorField,
    cosmological: f64,
    source: Option<&TensorField>,
    geometry: &GeometryRef,
    sampling: &Sampling,
) -> VerificationReport {
    let mut fields = vec![metric];
    fields.extend(source);
    let grid = sampling.grid(&fields);
    let rows = Rows {
        geometry,
        grid: &grid,
        backend: metric.backend(),
        tol: sampling.tolerance(metric.backend()),
    };
    let anchor = if source.is_some() {
        ANCHOR_EINSTEIN_MATTER
    } else {
        ANCHOR_EINSTEIN
    };
    rows.sweep(&[("einstein_residual", anchor)], |p| {
        let res = einstein_tensor_residual(metric, cosmological, source, p)?;
        let geo = Geometry::at(metric, p, 0)?;
        Ok(vec![geo.residual_norm(Valence::BILINEAR, &res)?])
    })
    .remove(0)
    .with_note(&format!("Λ = {cosmological}"))
}

/// Residuals of the four general near-horizon equations at `p`: the scalar
/// defining `λ`, the tensor equation, the scalar equation with `|dX|²` and
/// the one-form equation.
pub fn general_nhg_at(bundle: &NHGBundle, p: &[f64]) -> Result<[f64; 4]> {
    let base = &bundle.base;
    let n = base.dim();
    let geo = Geometry::at(&base.g, p, 2)?;
    let x = covector_jets(&base.x, p, 2)?;
    let y = scalar_jet(&bundle.y, p, 2)?;
    let lambda = bundle.lambda;
    let yv = y.value();
    let xv = values(&x);
    let x2 = geo.norm2(&x).value();
    let divx = geo.divergence(&x).value();

    let constraint = (lambda - (yv - 0.5 * x2 + 0.5 * divx)).abs();

    let be = values(&bakry_emery_jets(&geo, &x, 2.0));
    let g = values(geo.metric());
    let tensor: Vec<f64> = g.iter().zip(&be).map(|(g, b)| lambda * g - b).collect();
    let tensor = geo.orthonormal_norm(Valence::BILINEAR, &tensor)?;

    // (dX)_ij = ∇_i X_j − ∇_j X_i as jets of order one.
    let nx = geo.nabla_covector(&x);
    let dx: Vec<Jet> = (0..n * n)
        .map(|k| &nx[k] - &nx[(k % n) * n + k / n])
        .collect();
    let dx2 = geo.inner2(&dx, &dx).value();
    let x_up = values(&geo.raise(&x));
    let x_dot_dy: f64 = (0..n).map(|i| x_up[i] * y.gradient(i)).sum();
    let lap = geo.laplacian(&y).value();
    let scalar = (lap - 3.0 * x_dot_dy - yv * divx + 2.0 * yv * x2 - 0.5 * dx2).abs();

    let div_dx = values(&geo.divergence_bilinear(&dx));
    let one_form: Vec<f64> = (0..n)
        .map(|i| {
            let contraction: f64 = (0..n).map(|j| x_up[j] * dx[i * n + j].value()).sum();
            y.gradient(i) - yv * xv[i] - contraction + 0.5 * div_dx[i]
        })
        .collect();
    let one_form = geo.orthonormal_norm(Valence::COVECTOR, &one_form)?;
    Ok([constraint, tensor, scalar, one_form])
}

/// Grid maxima of the four general near-horizon residuals.
pub fn general_nhg_residuals(bundle: &NHGBundle, sampling: &Sampling) -> Vec<VerificationReport> {
    let base = &bundle.base;
    let grid = sampling.grid(&[&base.g, &base.x, &bundle.y]);
    let rows = Rows {
        geometry: &base.geometry,
        grid: &grid,
        backend: base.backend(),
        tol: sampling.tolerance(base.backend()),
    };
    rows.sweep(
        &[
            ("nhg_lambda_constraint", ANCHOR_GENERAL),
            ("nhg_tensor_equation", ANCHOR_GENERAL),
            ("nhg_scalar_equation", ANCHOR_GENERAL),
            ("nhg_one_form_equation", ANCHOR_GENERAL),
        ],
        |p| Ok(general_nhg_at(bundle, p)?.to_vec()),
    )
}

type Member = dyn Fn(f64) -> Result<TensorField> + Send + Sync;

/// A one-parameter family `ε ↦ 𝐠_ε` of Lorentzian metrics on one chart.
#[derive(Clone)]
pub struct LorentzianMetricFamily {
    pub name: String,
    chart: Arc<Chart>,
    member: Arc<Member>,
}

impl std::fmt::Debug for LorentzianMetricFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LorentzianMetricFamily")
            .field("name", &self.name)
            .field("dim", &self.chart.dim())
            .finish()
    }
}

impl LorentzianMetricFamily {
    pub fn new(
        name: &str,
        chart: Arc<Chart>,
        member: impl Fn(f64) -> Result<TensorField> + Send + Sync + 'static,
    ) -> Self {
        LorentzianMetricFamily {
            name: name.to_string(),
            chart,
            member: Arc::new(member),
        }
    }

    /// Pullbacks of `source` under `r ↦ εr, v ↦ v/ε`, with `v` on axis 0
    /// and `r` on axis 1.
    pub fn scaling(name: &str, source: &TensorField) -> Result<Self> {
        if source.chart().signature() != Signature::Lorentzian || source.dim() < 2 {
            return Err(Error::Precondition(
                "the scaling family needs a Lorentzian metric with (v, r) on axes 0 and 1".into(),
            ));
        }
        if source.valence() != Valence::BILINEAR || source.symmetry() != Symmetry::Symmetric {
            return Err(Error::ValenceMismatch("the scaled field must be a metric".into()));
        }
        let src = source.clone();
        Ok(Self::new(name, source.chart().clone(), move |eps| scaled_metric(&src, eps)))
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn member(&self, eps: f64) -> Result<TensorField> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::ParamOutOfRange {
                name: "ε".into(),
                value: eps,
                reason: "ε must be positive".into(),
            });
        }
        let g = (self.member)(eps)?;
        if **g.chart() != *self.chart {
            return Err(Error::Config(format!(
                "member ε = {eps} of `{}` left the family chart",
                self.name
            )));
        }
        Ok(g)
    }
}

/// Power of `ε` multiplying component `(a, b)` under `r ↦ εr, v ↦ v/ε`.
fn scaling_power(a: usize, b: usize) -> i32 {
    let w = |i: usize| match i {
        0 => -1,
        1 => 1,
        _ => 0,
    };
    w(a) + w(b)
}

fn scaled_metric(source: &TensorField, eps: f64) -> Result<TensorField> {
    let n = source.dim();
    let chart = source.chart().clone();
    if let Some(exprs) = source.exprs() {
        let sub = |i: usize| match i {
            0 => div(coord(0), num(eps)),
            1 => mul(num(eps), coord(1)),
            k => coord(k),
        };
        let comps = (0..n * n)
            .map(|k| {
                let e = exprs[k].substitute(&sub);
                match scaling_power(k / n, k % n) {
                    0 => e,
                    p => mul(num(eps.powi(p)), e),
                }
            })
            .collect();
        return Ok(TensorField::symmetric(chart, comps)?.with_backend(source.backend()));
    }
    let src = source.clone();
    let c = chart.clone();
    let f = TensorField::from_fn(chart, Valence::BILINEAR, Symmetry::Symmetric, move |p| {
        let mut q = p.to_vec();
        q[1] = eps * p[1];
        let v = c.wrap(0, p[0] / eps);
        match (v, c.wrap(1, q[1])) {
            (Some(v), Some(_)) => q[0] = v,
            _ => return vec![f64::NAN; n * n],
        }
        match src.values(&q) {
            Ok(g) => (0..n * n)
                .map(|k| eps.powi(scaling_power(k / n, k % n)) * g[k])
                .collect(),
            Err(_) => vec![f64::NAN; n * n],
        }
    });
    Ok(match source.backend() {
        Backend::Analytic => f,
        fd => f.with_backend(fd),
    })
}

/// Rows of a limit run and the extrapolated metric when the family
/// converges.
#[derive(Clone, Debug)]
pub struct LimitOutcome {
    pub reports: Vec<VerificationReport>,
    /// Measured order; `None` when every member agrees (a fixed point).
    pub order: Option<f64>,
    pub limit: Option<TensorField>,
}

/// Orders below this are reported as non-convergence.
pub const MIN_ORDER: f64 = 0.5;
/// Admissible deviation of the measured order from one.
pub const ORDER_TOLERANCE: f64 = 0.2;

/// Richardson extrapolation of the family along a strictly decreasing `ε`
/// sequence, assuming a first-order leading term. Reports the measured
/// order from successive maximal differences and, when `reference` is given,
/// the deviation of the limit from it against `10 ε_min`.
pub fn near_horizon_limit(
    family: &LorentzianMetricFamily,
    eps: &[f64],
    reference: Option<&TensorField>,
    geometry: &GeometryRef,
    sampling: &Sampling,
) -> Result<LimitOutcome> {
    if eps.len() < 4 {
        return Err(Error::Precondition(format!(
            "the ε sequence needs at least 4 terms, got {}",
            eps.len()
        )));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition(
            "the ε sequence must be positive and strictly decreasing".into(),
        ));
    }
    if let Some(r) = reference {
        if r.dim() != family.chart.dim() {
            return Err(Error::ValenceMismatch("reference and family dimensions differ".into()));
        }
    }
    let members: Vec<TensorField> = eps.iter().map(|&e| family.member(e)).collect::<Result<_>>()?;
    let k = eps.len();
    let nn = family.chart.dim().pow(2);
    let mut fields: Vec<&TensorField> = members.iter().collect();
    fields.extend(reference);
    let grid = sampling.grid(&fields);
    let backend = members[k - 1].backend();
    let tol_ref = 10.0 * eps[k - 1];
    let rows = Rows {
        geometry,
        grid: &grid,
        backend,
        tol: ORDER_TOLERANCE,
    };

    // Per point: k member component blocks.
    let table = sweep_values(&grid, k * nn, |p| {
        let mut out = Vec::with_capacity(k * nn);
        for m in &members {
            out.extend(m.values(p)?);
        }
        Ok(out)
    })?;

    // D_j = max |G_{j+1} − G_j| and where it is attained.
    let mut diffs = vec![(0.0f64, 0usize); k - 1];
    let mut scale: f64 = 1.0;
    for (idx, row) in table.iter().enumerate() {
        for j in 0..k - 1 {
            for c in 0..nn {
                let d = (row[(j + 1) * nn + c] - row[j * nn + c]).abs();
                if d > diffs[j].0 {
                    diffs[j] = (d, idx);
                }
            }
        }
        scale = row[(k - 1) * nn..].iter().fold(scale, |s, v| s.max(v.abs()));
    }
    let floor = 64.0 * f64::EPSILON * scale;

    let order = diffs
        .windows(2)
        .zip(eps.windows(3))
        .filter(|(d, _)| d[0].0 > floor && d[1].0 > floor)
        .map(|(d, e)| {
            // Differences over consecutive intervals: ε_j − ε_{j+1} ~ ε_j^p.
            (d[0].0 / d[1].0).ln() / (e[0] / e[1]).ln()
        })
        .next_back();
    let finest = diffs[k - 2];
    let stats = |v: f64| Stats {
        max: v,
        mean: v,
        argmax: grid.point(finest.1),
    };

    let mut reports = Vec::new();
    let exact = diffs.iter().all(|d| d.0 <= floor);
    let converged = match (exact, order) {
        (true, _) => {
            reports.push(
                rows.row("nhg_limit_order", ANCHOR_LIMIT, stats(0.0))
                    .with_note("all members agree: the family is a fixed point of the scaling"),
            );
            true
        }
        (false, Some(p)) => {
            let r = rows
                .row("nhg_limit_order", ANCHOR_LIMIT, stats((p - 1.0).abs()))
                .with_values(Some(p), Some(1.0));
            if p < MIN_ORDER {
                reports.push(r.with_note(&format!("non-convergence: order {p:.3} < {MIN_ORDER}")));
                false
            } else {
                reports.push(r);
                true
            }
        }
        (false, None) => {
            // Differences vanish at the finest scale only: converged to
            // rounding before the last step.
            reports.push(
                rows.row("nhg_limit_order", ANCHOR_LIMIT, stats(0.0))
                    .with_note("differences reach rounding level; order not measurable"),
            );
            true
        }
    };
    if !converged {
        if reference.is_some() {
            let e = Error::NonConvergence(format!("`{}` does not converge", family.name));
            let mut r = rows.error("nhg_limit_reference", ANCHOR_LIMIT, &e);
            r.tolerance = tol_ref;
            reports.push(r);
        }
        return Ok(LimitOutcome {
            reports,
            order,
            limit: None,
        });
    }

    let (e1, e0) = (eps[k - 1], eps[k - 2]);
    let richardson = move |g1: &[f64], g0: &[f64]| -> Vec<f64> {
        g1.iter()
            .zip(g0)
            .map(|(a, b)| (e0 * a - e1 * b) / (e0 - e1))
            .collect()
    };
    if let Some(reference) = reference {
        let mut worst = (0.0f64, 0usize);
        let mut sum = 0.0;
        for (idx, row) in table.iter().enumerate() {
            let lim = richardson(&row[(k - 1) * nn..], &row[(k - 2) * nn..(k - 1) * nn]);
            let want = reference.values(&grid.point(idx))?;
            let d = lim.iter().zip(&want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            sum += d;
            if d > worst.0 {
                worst = (d, idx);
            }
        }
        let s = Stats {
            max: worst.0,
            mean: sum / table.len() as f64,
            argmax: grid.point(worst.1),
        };
        reports.push(rows.row_tol("nhg_limit_reference", ANCHOR_LIMIT, s, tol_ref));
    }

    let (m1, m0) = (members[k - 1].clone(), members[k - 2].clone());
    let limit = TensorField::from_fn(family.chart.clone(), Valence::BILINEAR, Symmetry::Symmetric, move |p| {
        match (m1.values(p), m0.values(p)) {
            (Ok(a), Ok(b)) => richardson(&a, &b),
            _ => vec![f64::NAN; nn],
        }
    });
    Ok(LimitOutcome {
        reports,
        order,
        limit: Some(limit),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::get_with;

    fn lim_bundle() -> NHGBundle {
        NHGBundle::from_entry(&get_with("lim_product", &[("m", 2.0)]).unwrap()).unwrap()
    }

    #[test]
    fn bundle_stores_cosmological_constant() {
        let b = lim_bundle();
        assert_eq!(b.cosmological - b.dim() as f64 * b.lambda / 2.0, 0.0);
        assert_eq!(b.cosmological, -3.0);
    }

    #[test]
    fn minkowski_is_flat() {
        let e = get_with("minkowski", &[("n", 5.0)]).unwrap();
        let r = einstein_residual(&e.metric, 0.0, None, &e.geometry_ref(), &Sampling::with_n(8));
        assert!(r.passed(), "{}", r.text_line());
        assert_eq!(r.max, Some(0.0));
    }

    #[test]
    fn assembled_lim_product_is_the_btz_limit() {
        // 𝐠 from lim_product(2) is xbtz_nhg(¼) pulled back by r ↦ r/2.
        let g = assemble_nhg(&lim_bundle()).unwrap();
        let x = get_with("xbtz_nhg", &[("a", 0.25)]).unwrap().metric;
        for p in [[0.3, 0.2, 1.0, 0.1, 0.9], [0.7, -0.4, 4.0, -0.5, 1.3]] {
            let a = g.values(&p).unwrap();
            let q = [p[0], p[1] / 2.0, p[2], p[3], p[4]];
            let b = x.values(&q).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    // d(r/2) and dv carry the Jacobian of the identification.
                    let jac = |k: usize| if k == 1 { 0.5 } else { 1.0 };
                    let want = b[i * 5 + j] * jac(i) * jac(j);
                    assert!((a[i * 5 + j] - want).abs() < 1e-12, "({i},{j}) {} vs {want}", a[i * 5 + j]);
                }
            }
        }
    }

    #[test]
    fn vacuum_einstein_on_assembled_lim_product() {
        let g = assemble_nhg(&lim_bundle()).unwrap();
        let r = einstein_residual(&g, -3.0, None, &GeometryRef::new("lim", &[]), &Sampling::with_n(6));
        assert!(r.passed(), "{}", r.text_line());
    }

    #[test]
    fn wrong_y_moves_only_affine_terms() {
        let b = lim_bundle();
        let one = TensorField::scalar(b.base.g.chart().clone(), num(1.0)).unwrap();
        let wrong = b.with_y(one).unwrap();
        let p = [1.0, 0.2, 0.9];
        let [c, t, _, _] = general_nhg_at(&wrong, &p).unwrap();
        assert_eq!(c, 1.0);
        assert!(t < 1e-12);
        let ok = general_nhg_at(&b, &p).unwrap();
        assert!(ok.iter().all(|v| *v < 1e-12), "{ok:?}");
    }

    #[test]
    fn flat_plus_eps_dv2_has_order_one() {
        let chart = Arc::new(
            Chart::new(
                vec![Coordinate::periodic("v", 0.0, 1.0), Coordinate::new("r", -1.0, 1.0)],
                Signature::Lorentzian,
            )
            .unwrap(),
        );
        let c = chart.clone();
        let fam = LorentzianMetricFamily::new("flat_eps", chart.clone(), move |eps| {
            TensorField::symmetric(c.clone(), vec![num(eps), num(1.0), num(1.0), num(0.0)])
        });
        let out = near_horizon_limit(&fam, &[1e-1, 1e-2, 1e-3, 1e-4], None, &GeometryRef::new("flat", &[]), &Sampling::with_n(4)).unwrap();
        assert!((out.order.unwrap() - 1.0).abs() < 1e-6);
        let lim = out.limit.unwrap().values(&[0.5, 0.1]).unwrap();
        assert!(lim[0].abs() < 1e-15);
    }

    #[test]
    fn sequence_preconditions() {
        let g = get_with("xbtz_product", &[]).unwrap().metric;
        let fam = LorentzianMetricFamily::scaling("x", &g).unwrap();
        let geo = GeometryRef::new("x", &[]);
        for bad in [&[1e-1, 1e-2, 1e-3][..], &[1e-1, 1e-2, 1e-2, 1e-3][..]] {
            let e = near_horizon_limit(&fam, bad, None, &geo, &Sampling::with_n(4));
            assert!(matches!(e, Err(Error::Precondition(_))));
        }
        assert!(fam.member(-1.0).is_err());
    }
}
