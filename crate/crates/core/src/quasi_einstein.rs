//! The quasi-Einstein equation `Ric + ½£_X g − (1/m) X⊗X = λg` and the
//! identities that follow from it.

use crate::catalog::GeometryEntry;
use crate::chart::Signature;
use crate::error::{Error, Result};
use crate::field::{Backend, TensorField, Valence};
use crate::jet::Jet;
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::report::{column_stats, sweep, sweep_values, GeometryRef, Sampling, Stats, VerificationReport};
use crate::tensor::{covector_jets, require_same_chart, scalar_jet, Geometry, PointValue};

pub const ANCHOR_QE: &str = "quasi-Einstein equation";
pub const ANCHOR_STATIC: &str = "staticity dX = 0";
pub const ANCHOR_TRACE: &str = "trace of the quasi-Einstein equation";
pub const ANCHOR_LEMMA: &str = "static near-horizon redundancy identities";
pub const ANCHOR_MU: &str = "characteristic constant of gradient solutions";
pub const ANCHOR_RIGIDITY: &str = "rigidity invariants of non-exact solutions";
pub const ANCHOR_BOCHNER: &str = "Bochner identity for |X|²";
pub const ANCHOR_AVERAGE: &str = "average of |X|² over a closed manifold";

/// One instance `(g, X, m, λ)` of the quasi-Einstein equation.
#[derive(Clone, Debug)]
pub struct QEProblem {
    pub geometry: GeometryRef,
    pub g: TensorField,
    pub x: TensorField,
    pub m: f64,
    pub lambda: f64,
}

impl QEProblem {
    pub fn new(g: TensorField, x: TensorField, m: f64, lambda: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::ParamOutOfRange {
                name: "m".into(),
                value: m,
                reason: "m must lie in (0, ∞)".into(),
            });
        }
        if !lambda.is_finite() {
            return Err(Error::NonFinite("λ".into()));
        }
        if g.chart().signature() != Signature::Riemannian {
            return Err(Error::Precondition("the quasi-Einstein metric must be Riemannian".into()));
        }
        if x.valence() != Valence::COVECTOR {
            return Err(Error::ValenceMismatch("X must be a one-form".into()));
        }
        require_same_chart(&x, &g)?;
        Ok(QEProblem {
            geometry: GeometryRef::new("custom", &[]),
            g,
            x,
            m,
            lambda,
        })
    }

    /// Problem with the entry's claimed `m` (default 2) and `λ`.
    pub fn from_entry(entry: &GeometryEntry) -> Result<Self> {
        let lambda = entry.expected.lambda.ok_or_else(|| {
            Error::Precondition(format!("`{}` declares no λ", entry.name))
        })?;
        let m = entry.expected.m.unwrap_or(2.0);
        Ok(Self::new(entry.metric.clone(), entry.x_or_zero(), m, lambda)?.named(entry.geometry_ref()))
    }

    pub fn named(mut self, geometry: GeometryRef) -> Self {
        self.geometry = geometry;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_backend(&self, backend: Backend) -> Self {
        QEProblem {
            g: self.g.with_backend(backend),
            x: self.x.with_backend(backend),
            ..self.clone()
        }
    }

    pub fn backend(&self) -> Backend {
        self.g.backend()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    fn require_m2(&self) -> Result<()> {
        if self.m == 2.0 {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "the near-horizon system needs m = 2, got m = {}",
                self.m
            )))
        }
    }

    fn grid(&self, sampling: &Sampling) -> crate::chart::Grid {
        sampling.grid(&[&self.g, &self.x])
    }
}

/// A potential `f` for `X` with its characteristic constant, when known.
#[derive(Clone, Debug)]
pub struct GradientData {
    pub f: TensorField,
    pub mu: Option<f64>,
}

impl GradientData {
    pub fn new(f: TensorField, mu: Option<f64>) -> Self {
        GradientData { f, mu }
    }

    /// Potential of a closed `X` by path integration from the chart centre
    /// along straight segments. Values only; derivatives use the fd backend.
    pub fn reconstruct(prob: &QEProblem) -> Result<Self> {
        let x = prob.x.clone();
        let chart = x.chart().clone();
        let base = chart.center();
        let (nodes, weights) = gauss_legendre(24);
        let f = TensorField::from_fn(chart, Valence::SCALAR, crate::field::Symmetry::None, move |p| {
            let mut acc = 0.0;
            for (t, w) in nodes.iter().zip(&weights) {
                let s = 0.5 * (t + 1.0);
                let q: Vec<f64> = base.iter().zip(p).map(|(b, x)| b + s * (x - b)).collect();
                let v = x.values(&q).unwrap_or_else(|_| vec![f64::NAN; q.len()]);
                let dot: f64 = v.iter().zip(p.iter().zip(&base)).map(|(xi, (pi, bi))| xi * (pi - bi)).sum();
                acc += 0.5 * w * dot;
            }
            vec![acc]
        });
        Ok(GradientData { f, mu: None })
    }
}

pub(crate) fn values(jets: &[Jet]) -> Vec<f64> {
    jets.iter().map(Jet::value).collect()
}

/// `Ric + ½(∇_i X_j + ∇_j X_i) − (1/m) X_i X_j` as jets of order `order`.
pub(crate) fn bakry_emery_jets(geo: &Geometry, x: &[Jet], m: f64) -> Vec<Jet> {
    let n = geo.dim();
    let ric = geo.ricci();
    let nx = geo.nabla_covector(x);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let lie = (&nx[i * n + j] + &nx[j * n + i]).scale(0.5);
            let xx = (&x[i] * &x[j]).scale(1.0 / m);
            out.push(&(&ric[i * n + j] + &lie) - &xx);
        }
    }
    out
}

/// `Ric_X^m` at `p`.
pub fn bakry_emery_ricci(prob: &QEProblem, p: &[f64]) -> Result<PointValue> {
    let geo = Geometry::at(&prob.g, p, 2)?;
    let x = covector_jets(&prob.x, p, 1)?;
    PointValue::new(p, Valence::BILINEAR, values(&bakry_emery_jets(&geo, &x, prob.m)))
}

/// `Ric_X^m − λg` at `p`.
pub fn qe_residual_tensor(prob: &QEProblem, p: &[f64]) -> Result<PointValue> {
    let be = bakry_emery_ricci(prob, p)?;
    let g = prob.g.values(p)?;
    let comps = be.components.iter().zip(&g).map(|(b, g)| b - prob.lambda * g).collect();
    PointValue::new(p, Valence::BILINEAR, comps)
}

/// `dX_ij = ∂_i X_j − ∂_j X_i`.
pub(crate) fn dx_values(x: &[Jet], n: usize) -> Vec<f64> {
    (0..n * n)
        .map(|k| x[k % n].gradient(k / n) - x[k / n].gradient(k % n))
        .collect()
}

/// Orthonormal norms of `Ric_X^m − λg` and of `dX` at `p`.
pub fn qe_residual_at(prob: &QEProblem, p: &[f64]) -> Result<(f64, f64)> {
    let n = prob.dim();
    let geo = Geometry::at(&prob.g, p, 2)?;
    let x = covector_jets(&prob.x, p, 1)?;
    let be = values(&bakry_emery_jets(&geo, &x, prob.m));
    let g = values(geo.metric());
    let res: Vec<f64> = be.iter().zip(&g).map(|(b, g)| b - prob.lambda * g).collect();
    let r = geo.orthonormal_norm(Valence::BILINEAR, &res)?;
    let d = geo.orthonormal_norm(Valence::BILINEAR, &dx_values(&x, n))?;
    Ok((r, d))
}

/// Shared row construction for one problem on one grid.
pub(crate) struct Rows<'a> {
    pub geometry: &'a GeometryRef,
    pub grid: &'a crate::chart::Grid,
    pub backend: Backend,
    pub tol: f64,
}

impl Rows<'_> {
    pub fn row(&self, check: &str, anchor: &str, stats: Stats) -> VerificationReport {
        self.row_tol(check, anchor, stats, self.tol)
    }

    pub fn row_tol(&self, check: &str, anchor: &str, stats: Stats, tol: f64) -> VerificationReport {
        VerificationReport::from_stats(check, self.geometry, self.grid, self.backend, stats, tol, anchor)
    }

    pub fn error(&self, check: &str, anchor: &str, err: &Error) -> VerificationReport {
        let mut r = VerificationReport::error(check, self.geometry, self.backend, self.tol, anchor, err);
        r.grid = self.grid.shape();
        r
    }

    /// Rows for `checks` from one sweep, or one error row per check.
    pub fn sweep<F>(&self, checks: &[(&str, &str)], f: F) -> Vec<VerificationReport>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        match sweep(self.grid, checks.len(), f) {
            Ok(stats) => checks
                .iter()
                .zip(stats)
                .map(|((c, a), s)| self.row(c, a, s))
                .collect(),
            Err(e) => checks.iter().map(|(c, a)| self.error(c, a, &e)).collect(),
        }
    }
}

/// Grid maxima of `|Ric_X^m − λg|` and `|dX|`.
pub fn qe_residual(prob: &QEProblem, sampling: &Sampling) -> Vec<VerificationReport> {
    let grid = prob.grid(sampling);
    let rows = Rows {
        geometry: &prob.geometry,
        grid: &grid,
        backend: prob.backend(),
        tol: sampling.tolerance(prob.backend()),
    };
    rows.sweep(
        &[("qe_residual", ANCHOR_QE), ("dx_norm", ANCHOR_STATIC)],
        |p| {
            let (r, d) = qe_residual_at(prob, p)?;
            Ok(vec![r, d])
        },
    )
}

/// `R + div X − |X|²/m − nλ`, the trace of the equation for closed `X`.
pub fn trace_identity(prob: &QEProblem, p: &[f64]) -> Result<f64> {
    let n = prob.dim();
    let geo = Geometry::at(&prob.g, p, 2)?;
    let x = covector_jets(&prob.x, p, 1)?;
    let d = geo.orthonormal_norm(Valence::BILINEAR, &dx_values(&x, n))?;
    let tol = prob.backend().tolerance();
    if d > tol {
        log::warn!("trace identity at {p:?}: |dX| = {d:e} exceeds {tol:e}; X is not closed");
    }
    let r = geo.trace(&geo.ricci()).value();
    let div = geo.divergence(&x).value();
    let x2 = geo.norm2(&x).value();
    Ok(r + div - x2 / prob.m - n as f64 * prob.lambda)
}

/// `Y = λ + ½|X|² − ½ div X` as a jet one order below `x`.
fn static_y_jet(geo: &Geometry, x: &[Jet], lambda: f64) -> Jet {
    let half_x2 = geo.norm2(x).scale(0.5);
    let half_div = geo.divergence(x).scale(0.5);
    (&half_x2 - &half_div).add_scalar(lambda)
}

/// `Y = λ + ½|X|² − ½ div X`; defined for `m = 2`.
pub fn static_y(prob: &QEProblem, p: &[f64]) -> Result<f64> {
    prob.require_m2()?;
    let geo = Geometry::at(&prob.g, p, 1)?;
    let x = covector_jets(&prob.x, p, 1)?;
    Ok(static_y_jet(&geo, &x, prob.lambda).value())
}

/// `|∇Y − YX|` and `|ΔY − 3∇_X Y − Y div X + 2Y|X|²|` at `p`.
pub fn lemma21_at(prob: &QEProblem, p: &[f64]) -> Result<(f64, f64)> {
    prob.require_m2()?;
    let n = prob.dim();
    let geo = Geometry::at(&prob.g, p, 3)?;
    let x = covector_jets(&prob.x, p, 3)?;
    let y = static_y_jet(&geo, &x, prob.lambda);
    let yv = y.value();
    let xv = values(&x);
    let one_form: Vec<f64> = (0..n).map(|i| y.gradient(i) - yv * xv[i]).collect();
    let r1 = geo.orthonormal_norm(Valence::COVECTOR, &one_form)?;
    let x_up = values(&geo.raise(&x));
    let x_dot_dy: f64 = (0..n).map(|i| x_up[i] * y.gradient(i)).sum();
    let lap = geo.laplacian(&y).value();
    let div = geo.divergence(&x).value();
    let x2 = geo.norm2(&x).value();
    let r2 = (lap - 3.0 * x_dot_dy - yv * div + 2.0 * yv * x2).abs();
    Ok((r1, r2))
}

/// Largest input residual, or the row that blocked evaluation.
pub(crate) fn hypothesis_level(rows: &[VerificationReport]) -> std::result::Result<f64, String> {
    let mut worst: f64 = 0.0;
    for r in rows {
        match (r.status, r.max) {
            (crate::report::Status::Pass, Some(m)) => worst = worst.max(m),
            (_, Some(m)) => return Err(format!("{} = {m:.3e} exceeds {:.1e}", r.check, r.tolerance)),
            _ => return Err(format!("{} could not be evaluated: {}", r.check, r.note)),
        }
    }
    Ok(worst)
}

/// Pass threshold of an implied identity: tolerance plus ten times the
/// measured violation of its hypotheses.
pub fn implied_threshold(tol: f64, input: f64) -> f64 {
    tol + 10.0 * input
}

/// Checks `∇Y = YX` and the scalar identity for `Y` built from `(X, λ)`,
/// conditional on the quasi-Einstein residual and `|dX|` passing.
pub fn lemma21_check(prob: &QEProblem, sampling: &Sampling) -> Vec<VerificationReport> {
    let grid = prob.grid(sampling);
    let tol = sampling.tolerance(prob.backend());
    let rows = Rows {
        geometry: &prob.geometry,
        grid: &grid,
        backend: prob.backend(),
        tol,
    };
    let checks = [
        ("lemma_dy_minus_yx", ANCHOR_LEMMA),
        ("lemma_scalar_identity", ANCHOR_LEMMA),
    ];
    if let Err(e) = prob.require_m2() {
        return checks.iter().map(|(c, a)| rows.error(c, a, &e)).collect();
    }
    let hypotheses = hypothesis_level(&qe_residual(prob, sampling));
    let threshold = implied_threshold(tol, *hypotheses.as_ref().unwrap_or(&0.0));
    let out: Vec<VerificationReport> = rows
        .sweep(&checks, |p| {
            let (a, b) = lemma21_at(prob, p)?;
            Ok(vec![a, b])
        })
        .into_iter()
        .map(|mut r| {
            r.tolerance = threshold;
            if let Some(m) = r.max {
                r.status = if m <= threshold {
                    crate::report::Status::Pass
                } else {
                    crate::report::Status::Fail
                };
            }
            r
        })
        .collect();
    match hypotheses {
        Ok(_) => out,
        Err(why) => out
            .into_iter()
            .map(|r| {
                if r.status == crate::report::Status::Error {
                    r
                } else {
                    r.hypotheses_failed(&format!("hypothesis failed: {why}"))
                }
            })
            .collect(),
    }
}

/// `∮ X` along each periodic axis through `base`, by the trapezoid rule.
pub fn loop_integrals(x: &TensorField, base: &[f64]) -> Result<Vec<(usize, f64)>> {
    const NODES: usize = 128;
    let chart = x.chart().clone();
    let mut out = Vec::new();
    for axis in 0..chart.dim() {
        let Some(period) = chart.period(axis) else {
            continue;
        };
        let lo = chart.coords()[axis].lo;
        let step = period / NODES as f64;
        let mut terms = Vec::with_capacity(NODES);
        for k in 0..NODES {
            let mut q = base.to_vec();
            q[axis] = lo + k as f64 * step;
            terms.push(step * x.values(&q)?[axis]);
        }
        out.push((axis, crate::report::pairwise_sum(&terms)));
    }
    Ok(out)
}

/// `μ(p) = −(Δf − |df|² − mλ) e^{−2f/m} / m`, with `Δf = div X` and
/// `|df|² = |X|²` when `f` has no closed form.
pub fn mu_at(prob: &QEProblem, gradient: &GradientData, p: &[f64]) -> Result<f64> {
    let m = prob.m;
    let (lap, df2, f) = if gradient.f.has_analytic() {
        require_same_chart(&gradient.f, &prob.g)?;
        let geo = Geometry::at(&prob.g, p, 1)?;
        let fj = scalar_jet(&gradient.f, p, 2)?;
        let df: Vec<Jet> = geo.gradient(&fj);
        (geo.laplacian(&fj).value(), geo.norm2(&df).value(), fj.value())
    } else {
        let geo = Geometry::at(&prob.g, p, 1)?;
        let x = covector_jets(&prob.x, p, 1)?;
        let f = gradient.f.values(p)?[0];
        (geo.divergence(&x).value(), geo.norm2(&x).value(), f)
    };
    Ok(-(lap - df2 - m * prob.lambda) * (-2.0 * f / m).exp() / m)
}

/// Checks that `X = df` and that `μ(p)` is constant, comparing its mean with
/// the declared value when there is one.
pub fn characteristic_constant(
    prob: &QEProblem,
    gradient: &GradientData,
    sampling: &Sampling,
) -> Vec<VerificationReport> {
    let grid = prob.grid(sampling);
    let tol = sampling.tolerance(prob.backend());
    let rows = Rows {
        geometry: &prob.geometry,
        grid: &grid,
        backend: prob.backend(),
        tol,
    };
    let checks = ["mu_constancy", "mu_value"];
    let fail_all = |e: Error| checks.iter().map(|c| rows.error(c, ANCHOR_MU, &e)).collect();

    // Exactness: vanishing periods, then |X − df| on the grid.
    match loop_integrals(&prob.x, &prob.g.chart().center()) {
        Ok(loops) => {
            if let Some((axis, v)) = loops.iter().find(|(_, v)| v.abs() > tol) {
                return fail_all(Error::Precondition(format!(
                    "X is not exact: loop integral along axis {axis} is {v:.9}"
                )));
            }
        }
        Err(e) => return fail_all(e),
    }
    if gradient.f.has_analytic() {
        let exact = sweep(&grid, 1, |p| {
            let geo = Geometry::at(&prob.g, p, 0)?;
            let df = scalar_jet(&gradient.f, p, 1)?;
            let x = prob.x.values(p)?;
            let diff: Vec<f64> = (0..prob.dim()).map(|i| x[i] - df.gradient(i)).collect();
            Ok(vec![geo.orthonormal_norm(Valence::COVECTOR, &diff)?])
        });
        match exact {
            Ok(s) if s[0].max > tol => {
                return fail_all(Error::Precondition(format!(
                    "X is not df: max |X − df| = {:.3e}",
                    s[0].max
                )))
            }
            Ok(_) => {}
            Err(e) => return fail_all(e),
        }
    }

    let mus = match sweep_values(&grid, 1, |p| Ok(vec![mu_at(prob, gradient, p)?])) {
        Ok(v) => v,
        Err(e) => return fail_all(e),
    };
    let mean = column_stats(&grid, &mus, 0).mean;
    let deviations: Vec<Vec<f64>> = mus.iter().map(|r| vec![(r[0] - mean).abs()]).collect();
    let constancy = rows
        .row(checks[0], ANCHOR_MU, column_stats(&grid, &deviations, 0))
        .with_values(Some(mean), None);
    let mut out = vec![constancy];
    if let Some(mu) = gradient.mu {
        let dev = (mean - mu).abs();
        let argmax = column_stats(&grid, &mus, 0).argmax;
        out.push(
            rows.row(checks[1], ANCHOR_MU, Stats { max: dev, mean: dev, argmax })
                .with_values(Some(mean), Some(mu)),
        );
    }
    out
}

/// `div X`, `|X|² + mλ`, `R − (n−1)λ`, `div X − |X|² − mλ` at `p`.
pub fn rigidity_at(prob: &QEProblem, p: &[f64]) -> Result<[f64; 4]> {
    let n = prob.dim() as f64;
    let geo = Geometry::at(&prob.g, p, 2)?;
    let x = covector_jets(&prob.x, p, 1)?;
    let div = geo.divergence(&x).value();
    let x2 = geo.norm2(&x).value();
    let r = geo.trace(&geo.ricci()).value();
    let ml = prob.m * prob.lambda;
    Ok([div, x2 + ml, r - (n - 1.0) * prob.lambda, div - x2 - ml])
}

/// The four rigidity invariants. Rows gate only for solutions in the
/// non-exact branch with `λ < 0`; elsewhere they are informational.
pub fn rigidity_invariants(prob: &QEProblem, sampling: &Sampling) -> Vec<VerificationReport> {
    let grid = prob.grid(sampling);
    let tol = sampling.tolerance(prob.backend());
    let rows = Rows {
        geometry: &prob.geometry,
        grid: &grid,
        backend: prob.backend(),
        tol,
    };
    let checks = [
        ("rigidity_div_x", ANCHOR_RIGIDITY),
        ("rigidity_norm_x", ANCHOR_RIGIDITY),
        ("rigidity_scalar_curvature", ANCHOR_RIGIDITY),
        ("rigidity_exactness_alternative", ANCHOR_RIGIDITY),
    ];
    let out = rows.sweep(&checks, |p| Ok(rigidity_at(prob, p)?.iter().map(|v| v.abs()).collect()));
    let branch = rigidity_branch(prob, sampling);
    match branch {
        Ok(()) => out,
        Err(why) => out
            .into_iter()
            .map(|r| r.informational().with_note(&format!("outside the rigidity branch: {why}")))
            .collect(),
    }
}

/// Whether `(g, X)` solves the equation with `λ < 0` and non-exact `X`.
fn rigidity_branch(prob: &QEProblem, sampling: &Sampling) -> std::result::Result<(), String> {
    if prob.lambda >= 0.0 {
        return Err(format!("λ = {} is not negative", prob.lambda));
    }
    hypothesis_level(&qe_residual(prob, sampling))?;
    let loops = loop_integrals(&prob.x, &prob.g.chart().center()).map_err(|e| e.to_string())?;
    let tol = sampling.tolerance(prob.backend());
    if loops.iter().all(|(_, v)| v.abs() <= tol) {
        return Err("X has vanishing periods".into());
    }
    Ok(())
}

/// `Δ|X|² − ∇_X|X|² − 2|∇X|² − (2/m)|X|²(|X|² + mλ)` at `p`; closed-form
/// fields only.
pub fn bochner_residual(prob: &QEProblem, p: &[f64]) -> Result<f64> {
    if prob.backend() != Backend::Analytic || prob.x.backend() != Backend::Analytic {
        return Err(Error::Backend(
            "the Bochner residual is evaluated on the analytic backend only".into(),
        ));
    }
    let n = prob.dim();
    let geo = Geometry::at(&prob.g, p, 3)?;
    let x = covector_jets(&prob.x, p, 3)?;
    let x2 = geo.norm2(&x);
    let lap = geo.laplacian(&x2).value();
    let x_up = values(&geo.raise(&x));
    let along: f64 = (0..n).map(|i| x_up[i] * x2.gradient(i)).sum();
    let nx = geo.nabla_covector(&x);
    let nx2 = geo.inner2(&nx, &nx).value();
    let s = x2.value();
    Ok(lap - along - 2.0 * nx2 - 2.0 / prob.m * s * (s + prob.m * prob.lambda))
}

pub fn bochner_check(prob: &QEProblem, sampling: &Sampling) -> Vec<VerificationReport> {
    let grid = prob.grid(sampling);
    let tol = sampling.tolerance(prob.backend());
    let rows = Rows {
        geometry: &prob.geometry,
        grid: &grid,
        backend: prob.backend(),
        tol,
    };
    let out = rows.sweep(&[("bochner_residual", ANCHOR_BOCHNER)], |p| {
        Ok(vec![bochner_residual(prob, p)?.abs()])
    });
    let exactness_alt = rows.sweep(&[("rigidity_exactness_alternative", ANCHOR_RIGIDITY)], |p| {
        Ok(vec![rigidity_at(prob, p)?[3].abs()])
    });
    match hypothesis_level(&exactness_alt) {
        Ok(_) => out,
        Err(why) => out
            .into_iter()
            .map(|r| {
                if r.status == crate::report::Status::Error {
                    r
                } else {
                    r.hypotheses_failed(&format!("hypothesis failed: {why}"))
                }
            })
            .collect(),
    }
}

/// `|∫|X|² dV / vol + mλ|` by quadrature, or the pointwise bound on
/// `|X|² + mλ` when no global quadrature exists.
pub fn average_norm_identity(
    prob: &QEProblem,
    quadrature: Option<&QuadratureRule>,
    sampling: &Sampling,
) -> Vec<VerificationReport> {
    let grid = prob.grid(sampling);
    let tol = sampling.tolerance(prob.backend());
    let rows = Rows {
        geometry: &prob.geometry,
        grid: &grid,
        backend: prob.backend(),
        tol,
    };
    let hypotheses = rows.sweep(&[("rigidity_exactness_alternative", ANCHOR_RIGIDITY)], |p| {
        Ok(vec![rigidity_at(prob, p)?[3].abs()])
    });
    let target = -prob.m * prob.lambda;
    let out = match quadrature {
        Some(rule) => {
            let check = "average_norm_quadrature";
            let result = (|| {
                let vol = rule.volume(&prob.g)?;
                let integral = rule.integrate(&prob.g, |p| {
                    let geo = Geometry::at(&prob.g, p, 0)?;
                    let x = covector_jets(&prob.x, p, 0)?;
                    Ok(geo.norm2(&x).value())
                })?;
                Ok::<f64, Error>(integral / vol)
            })();
            match result {
                Ok(avg) => {
                    let dev = (avg - target).abs();
                    let mut r = rows.row(check, ANCHOR_AVERAGE, Stats::single(dev, prob.g.chart().center()));
                    r.grid = rule.shape();
                    r.with_values(Some(avg), Some(target))
                        .with_note("quadrature")
                }
                Err(e) => rows.error(check, ANCHOR_AVERAGE, &e),
            }
        }
        None => {
            let check = "average_norm_pointwise";
            rows.sweep(&[(check, ANCHOR_AVERAGE)], |p| {
                let geo = Geometry::at(&prob.g, p, 0)?;
                let x = covector_jets(&prob.x, p, 0)?;
                Ok(vec![(geo.norm2(&x).value() - target).abs()])
            })
            .remove(0)
            .with_note("pointwise reduction: no global quadrature chart")
        }
    };
    match hypothesis_level(&hypotheses) {
        Ok(_) => vec![out],
        Err(why) if out.status != crate::report::Status::Error => {
            vec![out.hypotheses_failed(&format!("hypothesis failed: {why}"))]
        }
        Err(_) => vec![out],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::get_with;

    fn lim(m: f64) -> QEProblem {
        QEProblem::from_entry(&get_with("lim_product", &[("m", m)]).unwrap()).unwrap()
    }

    #[test]
    fn lim_product_bakry_emery_is_minus_m_g() {
        let prob = lim(2.0);
        let p = [0.3, 0.1, 0.8];
        let be = bakry_emery_ricci(&prob, &p).unwrap();
        let g = prob.g.values(&p).unwrap();
        for k in 0..9 {
            assert!((be.components[k] + 2.0 * g[k]).abs() < 1e-12);
        }
        assert!(trace_identity(&prob, &p).unwrap().abs() < 1e-12);
        assert!(static_y(&prob, &p).unwrap().abs() < 1e-12);
        let [a, b, c, d] = rigidity_at(&prob, &p).unwrap();
        assert!(a.abs() + b.abs() + c.abs() + d.abs() < 1e-12);
        assert!(bochner_residual(&lim(5.0), &p).unwrap().abs() < 1e-11);
    }

    #[test]
    fn static_y_requires_m_two() {
        assert!(matches!(static_y(&lim(3.0), &[0.0, 0.0, 1.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn loop_integral_witnesses_non_exactness() {
        let prob = lim(1.5);
        let loops = loop_integrals(&prob.x, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(loops.len(), 1);
        assert!((loops[0].1 - 2.0 * std::f64::consts::PI * 1.5).abs() < 1e-12);
    }

    #[test]
    fn sds_characteristic_constant_closed_form() {
        // Δf − |df|² − mλ = −mμψ^{−2} at ψ = 0.5 for (2, 1, 1, 0).
        let e = get_with("sds_cylinder", &[]).unwrap();
        let prob = QEProblem::from_entry(&e).unwrap();
        let grad = GradientData::new(e.f.clone().unwrap(), e.expected.mu);
        let mu = mu_at(&prob, &grad, &[0.5, 1.0]).unwrap();
        assert!((mu - 1.0).abs() < 1e-12);
        // Y = λ + ½|X|² − ½ div X = 4 at ψ = 0.5.
        assert!((static_y(&prob, &[0.5, 1.0]).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn reconstructed_potential_matches_closed_form() {
        let e = get_with("sds_cylinder", &[("a", 0.1)]).unwrap();
        let prob = QEProblem::from_entry(&e).unwrap();
        let rec = GradientData::reconstruct(&prob).unwrap();
        let f = e.f.unwrap();
        let c = e.chart.center();
        for psi in [0.4, 0.9, 1.3] {
            let p = [psi, 2.0];
            let got = rec.f.values(&p).unwrap()[0];
            let want = f.values(&p).unwrap()[0] - f.values(&c).unwrap()[0];
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }
}
