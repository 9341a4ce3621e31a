//! The Yamabe functional on closed charts and the decomposition of its
//! integrand under the trace of the quasi-Einstein equation.

use std::sync::Arc;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::parse_in;
use crate::field::{TensorField, Valence};
use crate::quadrature::QuadratureRule;
use crate::quasi_einstein::{hypothesis_level, qe_residual, QEProblem, Rows};
use crate::report::{Sampling, Stats, VerificationReport};
use crate::tensor::{covector_jets, require_same_chart, scalar_jet, Geometry};

pub const ANCHOR_FUNCTIONAL: &str = "Yamabe functional";
pub const ANCHOR_DECOMPOSITION: &str = "trace decomposition of the Yamabe integrand";
pub const ANCHOR_BOUND: &str = "Yamabe positivity bound";

/// Default tolerance for quantities computed by quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

/// `4(n−1)/(n−2)`.
pub fn conformal_constant(n: usize) -> f64 {
    4.0 * (n as f64 - 1.0) / (n as f64 - 2.0)
}

fn require_dim(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Precondition(format!(
            "the Yamabe functional needs n ≥ 3, got n = {n}"
        )));
    }
    Ok(())
}

/// A test function `φ` and free constant `k ≠ 0` on a quasi-Einstein
/// problem.
#[derive(Clone, Debug)]
pub struct YamabeEval {
    pub problem: QEProblem,
    pub phi: TensorField,
    pub k: f64,
}

impl YamabeEval {
    pub fn new(problem: QEProblem, phi: TensorField, k: f64) -> Result<Self> {
        require_dim(problem.dim())?;
        if !(k.is_finite() && k != 0.0) {
            return Err(Error::ParamOutOfRange {
                name: "k".into(),
                value: k,
                reason: "k must be a nonzero real".into(),
            });
        }
        if phi.valence() != Valence::SCALAR {
            return Err(Error::ValenceMismatch("φ must be a function".into()));
        }
        require_same_chart(&phi, &problem.g)?;
        Ok(YamabeEval { problem, phi, k })
    }

    pub fn with_phi(&self, phi: TensorField) -> Result<Self> {
        Self::new(self.problem.clone(), phi, self.k)
    }
}

/// `∫ f dV_g` of a scalar field.
pub fn integrate(field: &TensorField, metric: &TensorField, rule: &QuadratureRule) -> Result<f64> {
    require_same_chart(field, metric)?;
    rule.integrate_field(field, metric)
}

/// Integrals `∫(a|∇φ|² + Rφ²)`, `∫(|∇φ|² + φ²)` and `∫|φ|^{2n/(n−2)}`.
fn integrals(g: &TensorField, phi: &TensorField, rule: &QuadratureRule) -> Result<[f64; 3]> {
    let n = g.dim();
    require_dim(n)?;
    require_same_chart(phi, g)?;
    let a = conformal_constant(n);
    let p = 2.0 * n as f64 / (n as f64 - 2.0);
    let v = rule.integrate_many(g, 3, |x| {
        let geo = Geometry::at(g, x, 2)?;
        let f = scalar_jet(phi, x, 1)?;
        let grad2 = geo.norm2(&geo.gradient(&f)).value();
        let r = geo.trace(&geo.ricci()).value();
        let phi = f.value();
        Ok(vec![a * grad2 + r * phi * phi, grad2 + phi * phi, phi.abs().powf(p)])
    })?;
    Ok([v[0], v[1], v[2]])
}

fn denominator(power: f64, n: usize) -> Result<f64> {
    let d = power.powf((n as f64 - 2.0) / n as f64);
    if d > 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Precondition("∫φ^(2n/(n−2)) dV vanishes".into()))
    }
}

/// `Q_g(φ) = ∫(a|∇φ|² + Rφ²) dV / (∫φ^{2n/(n−2)} dV)^{(n−2)/n}`.
pub fn yamabe_quotient(g: &TensorField, phi: &TensorField, rule: &QuadratureRule) -> Result<f64> {
    let [energy, _, power] = integrals(g, phi, rule)?;
    Ok(energy / denominator(power, g.dim())?)
}

/// Both sides of the decomposition at `p`: `a|∇φ|² + Rφ²` with `R` from
/// the curvature, and
/// `(a − k²)|∇φ|² − div(φ²X) + |k∇φ + Xφ/k|² + ((k²−m)/(mk²))|X|²φ² + nλφ²`.
pub fn decomposition_sides(eval: &YamabeEval, p: &[f64]) -> Result<(f64, f64)> {
    let terms = decomposition_terms(eval, p)?;
    Ok((terms.lhs, terms.rhs))
}

/// Pointwise pieces of the decomposition; `power` is `|φ|^{2n/(n−2)}`.
struct Terms {
    lhs: f64,
    rhs: f64,
    divergence: f64,
    power: f64,
}

fn decomposition_terms(eval: &YamabeEval, p: &[f64]) -> Result<Terms> {
    let prob = &eval.problem;
    let n = prob.dim();
    let a = conformal_constant(n);
    let (k, m) = (eval.k, prob.m);
    let geo = Geometry::at(&prob.g, p, 2)?;
    let x = covector_jets(&prob.x, p, 1)?;
    let f = scalar_jet(&eval.phi, p, 1)?;
    let df = geo.gradient(&f);
    let phi = f.value();
    let grad2 = geo.norm2(&df).value();
    let r = geo.trace(&geo.ricci()).value();
    let lhs = a * grad2 + r * phi * phi;

    // div(φ²X) = φ² div X + 2φ X·∇φ, kept as its own term.
    let divergence = phi * phi * geo.divergence(&x).value() + 2.0 * phi * geo.inner(&x, &df).value();
    let mixed: Vec<_> = df
        .iter()
        .zip(&x)
        .map(|(d, x)| &d.truncate(0).scale(k) + &x.truncate(0).scale(phi / k))
        .collect();
    let square = geo.norm2(&mixed).value();
    let x2 = geo.norm2(&x).value();
    let rhs = (a - k * k) * grad2 - divergence
        + square
        + (k * k - m) / (m * k * k) * x2 * phi * phi
        + n as f64 * prob.lambda * phi * phi;
    let power = phi.abs().powf(2.0 * n as f64 / (n as f64 - 2.0));
    Ok(Terms {
        lhs,
        rhs,
        divergence,
        power,
    })
}

/// `|LHS − RHS|` of the decomposition at `p`.
pub fn decomposition_at(eval: &YamabeEval, p: &[f64]) -> Result<f64> {
    let (l, r) = decomposition_sides(eval, p)?;
    Ok((l - r).abs())
}

/// Grid maximum of the decomposition defect, conditional on the
/// quasi-Einstein residual passing.
pub fn decomposition_check(eval: &YamabeEval, sampling: &Sampling) -> Vec<VerificationReport> {
    let prob = &eval.problem;
    let grid = sampling.grid(&[&prob.g, &prob.x, &eval.phi]);
    let rows = Rows {
        geometry: &prob.geometry,
        grid: &grid,
        backend: prob.backend(),
        tol: sampling.tolerance(prob.backend()),
    };
    let out = rows
        .sweep(&[("yamabe_decomposition", ANCHOR_DECOMPOSITION)], |p| {
            Ok(vec![decomposition_at(eval, p)?])
        })
        .remove(0)
        .with_note(&format!("k = {}", eval.k));
    match hypothesis_level(&qe_residual(prob, sampling)) {
        Err(why) if out.status != crate::report::Status::Error => {
            vec![out.hypotheses_failed(&format!("hypothesis failed: {why}"))]
        }
        _ => vec![out],
    }
}

fn quadrature_row(
    eval: &YamabeEval,
    rule: &QuadratureRule,
    check: &str,
    anchor: &str,
    value: f64,
    tol: f64,
) -> VerificationReport {
    let prob = &eval.problem;
    let grid = crate::chart::Grid::from_axes(rule.shape().iter().map(|_| Vec::new()).collect());
    let rows = Rows {
        geometry: &prob.geometry,
        grid: &grid,
        backend: prob.backend(),
        tol,
    };
    let mut r = rows.row(check, anchor, Stats::single(value, prob.g.chart().center()));
    r.grid = rule.shape();
    r.with_note("quadrature")
}

/// Integrated form of the decomposition: `Q_g(φ)` against the integral of
/// the right-hand side without its divergence term, and `|∫div(φ²X) dV|`.
pub fn integral_identity(eval: &YamabeEval, rule: &QuadratureRule, tol: f64) -> Vec<VerificationReport> {
    let prob = &eval.problem;
    let checks = [
        ("yamabe_integral_identity", ANCHOR_FUNCTIONAL),
        ("yamabe_divergence_integral", ANCHOR_DECOMPOSITION),
    ];
    let result = (|| {
        let n = prob.dim();
        require_dim(n)?;
        let v = rule.integrate_many(&prob.g, 4, |p| {
            let t = decomposition_terms(eval, p)?;
            Ok(vec![t.lhs, t.power, t.divergence, t.rhs + t.divergence])
        })?;
        let denom = denominator(v[1], n)?;
        Ok::<_, Error>((v[0] / denom, v[3] / denom, v[2]))
    })();
    match result {
        Ok((q, q_rhs, div)) => vec![
            quadrature_row(eval, rule, checks[0].0, checks[0].1, (q - q_rhs).abs(), tol)
                .with_values(Some(q_rhs), Some(q)),
            quadrature_row(eval, rule, checks[1].0, checks[1].1, div.abs(), tol),
        ],
        Err(e) => checks
            .iter()
            .map(|(c, a)| {
                let mut r = VerificationReport::error(c, &prob.geometry, prob.backend(), tol, a, &e);
                r.grid = rule.shape();
                r
            })
            .collect(),
    }
}

/// Lower bound `min{a − k², nλ} ∫(|∇φ|² + φ²) / (∫φ^{2n/(n−2)})^{(n−2)/n}`
/// with the quotient it bounds.
pub fn bound_values(eval: &YamabeEval, rule: &QuadratureRule) -> Result<(f64, f64)> {
    let prob = &eval.problem;
    let n = prob.dim();
    let a = conformal_constant(n);
    let k2 = eval.k * eval.k;
    if prob.lambda < 0.0 {
        return Err(Error::Precondition(format!("λ = {} is negative", prob.lambda)));
    }
    let borderline = prob.m == a && k2 == a;
    if !(prob.m > 0.0 && prob.m <= k2 && (k2 < a || borderline)) {
        return Err(Error::Precondition(format!(
            "need 0 < m ≤ k² < 4(n−1)/(n−2): m = {}, k² = {k2}, 4(n−1)/(n−2) = {a}",
            prob.m
        )));
    }
    let [energy, sobolev, power] = integrals(&prob.g, &eval.phi, rule)?;
    let denom = denominator(power, n)?;
    let c = (a - k2).min(n as f64 * prob.lambda);
    Ok((energy / denom, c * sobolev / denom))
}

/// Checks `Q_g(φ) ≥ bound`; the row's residual is the violation
/// `max(0, bound − Q)`.
pub fn bound_check(eval: &YamabeEval, rule: &QuadratureRule, tol: f64) -> VerificationReport {
    let prob = &eval.problem;
    match bound_values(eval, rule) {
        Ok((q, bound)) => quadrature_row(eval, rule, "yamabe_bound", ANCHOR_BOUND, (bound - q).max(0.0), tol)
            .with_values(Some(q), Some(bound))
            .with_note(&format!("k = {}", eval.k)),
        Err(e) => {
            let mut r = VerificationReport::error("yamabe_bound", &prob.geometry, prob.backend(), tol, ANCHOR_BOUND, &e);
            r.grid = rule.shape();
            r
        }
    }
}

/// Constants `k` paired with the deterministic trial functions.
const TRIAL_K: [f64; 5] = [0.7, 1.3, 2.0, 0.5, 1.7];

fn wave(chart: &Chart, axis: usize, freq: f64, phase: f64) -> String {
    let c = &chart.coords()[axis];
    if c.periodic {
        let w = freq * 2.0 * std::f64::consts::PI / (c.hi - c.lo);
        format!("sin(({w:?})*({} - ({:?})) + ({phase:?}))", c.name, c.lo)
    } else {
        format!("cos(({freq:?})*{} + ({phase:?}))", c.name)
    }
}

/// `count` smooth positive functions with nonzero constants `k`, fixed for
/// a given chart.
pub fn trial_functions(chart: &Arc<Chart>, count: usize) -> Result<Vec<(TensorField, f64)>> {
    let n = chart.dim();
    let names = chart.names();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    (0..count)
        .map(|i| {
            let a = i % n;
            let b = (i + 1) % n;
            let text = format!(
                "2 + 0.5*{} + 0.3*{}",
                wave(chart, a, 1.0 + (i % 2) as f64, 0.3 * i as f64),
                wave(chart, b, 1.0, 0.7 + 0.2 * i as f64)
            );
            let phi = TensorField::scalar(chart.clone(), parse_in(&text, &refs, &[])?)?;
            Ok((phi, TRIAL_K[i % TRIAL_K.len()]))
        })
        .collect()
}
