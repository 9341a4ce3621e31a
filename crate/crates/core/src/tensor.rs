//! Curvature and derivative operators.
//!
//! [`Geometry`] holds the metric, its inverse and the Christoffel symbols as
//! jets at one point; everything else is algebra on those jets. The free
//! functions at the bottom are the point-value interface used by callers that
//! want plain numbers.

use serde::Serialize;

use crate::chart::Signature;
use crate::error::{Error, Result};
use crate::field::{Symmetry, TensorField, Valence};
use crate::jet::{self, Jet};

/// Tensor components at one point. Indices are row-major with contravariant
/// indices first, so `Γ^k_ij` is stored at `k*n*n + i*n + j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointValue {
    pub point: Vec<f64>,
    pub valence: Valence,
    pub components: Vec<f64>,
}

impl PointValue {
    pub fn new(point: &[f64], valence: Valence, components: Vec<f64>) -> Result<Self> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("tensor components at {point:?}")));
        }
        Ok(PointValue {
            point: point.to_vec(),
            valence,
            components,
        })
    }

    fn from_jets(point: &[f64], valence: Valence, jets: &[Jet]) -> Result<Self> {
        Self::new(point, valence, jets.iter().map(Jet::value).collect())
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        let n = self.dim();
        self.components[index.iter().fold(0, |acc, &i| acc * n + i)]
    }

    /// Largest absolute component.
    pub fn sup_norm(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Metric data at one point: `g`, `g⁻¹` and `Γ` as jets.
pub struct Geometry {
    n: usize,
    signature: Signature,
    g: Vec<Jet>,
    ginv: Vec<Jet>,
    gamma: Vec<Jet>,
}

impl Geometry {
    /// Expands `metric` about `p` with `order` derivatives of `g`.
    pub fn at(metric: &TensorField, p: &[f64], order: usize) -> Result<Self> {
        if metric.valence() != Valence::BILINEAR || metric.symmetry() != Symmetry::Symmetric {
            return Err(Error::ValenceMismatch(
                "metric must be a symmetric (2,0) field".into(),
            ));
        }
        let g = metric.jets(p, order)?;
        Self::from_jets(g, p, metric.chart().signature())
    }

    /// Builds from metric component jets, checking invertibility and the
    /// signature at the expansion point.
    pub fn from_jets(g: Vec<Jet>, p: &[f64], signature: Signature) -> Result<Self> {
        let n = (g.len() as f64).sqrt().round() as usize;
        let values: Vec<f64> = g.iter().map(Jet::value).collect();
        check_signature(&values, n, signature, p)?;
        let ginv = invert(&g, n).ok_or_else(|| Error::SingularMetric { point: p.to_vec() })?;
        let gamma = if g[0].order() > 0 {
            christoffel_jets(&g, &ginv, n)
        } else {
            Vec::new()
        };
        Ok(Geometry {
            n,
            signature,
            g,
            ginv,
            gamma,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.g[0].order()
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn metric(&self) -> &[Jet] {
        &self.g
    }

    pub fn inverse(&self) -> &[Jet] {
        &self.ginv
    }

    /// `Γ^k_ij` at `k*n*n + i*n + j`, one order below the metric.
    pub fn christoffel(&self) -> &[Jet] {
        &self.gamma
    }

    fn gam(&self, k: usize, i: usize, j: usize) -> &Jet {
        &self.gamma[(k * self.n + i) * self.n + j]
    }

    fn zero(&self, order: usize) -> Jet {
        Jet::zero(self.n, order)
    }

    /// `R_bd = ∂_a Γ^a_bd − ∂_d Γ^a_ab + Γ^a_ae Γ^e_bd − Γ^a_de Γ^e_ab`,
    /// two orders below the metric.
    pub fn ricci(&self) -> Vec<Jet> {
        let n = self.n;
        let order = self.order() - 2;
        // trace Γ^a_ae and its derivatives are shared by every entry
        let trace: Vec<Jet> = (0..n)
            .map(|e| jet::sum((0..n).map(|a| self.gam(a, a, e).clone())).expect("n > 0"))
            .collect();
        let mut out = vec![self.zero(order); n * n];
        for b in 0..n {
            for d in b..n {
                let mut r = self.zero(order);
                for a in 0..n {
                    r += &self.gam(a, b, d).d(a);
                }
                r -= &trace[b].d(d);
                for e in 0..n {
                    r += &(&trace[e] * self.gam(e, b, d));
                    for a in 0..n {
                        r -= &(self.gam(a, d, e) * self.gam(e, a, b));
                    }
                }
                out[d * n + b] = r.clone();
                out[b * n + d] = r;
            }
        }
        out
    }

    /// `g^{ij} t_ij`.
    pub fn trace(&self, t: &[Jet]) -> Jet {
        let n = self.n;
        let mut acc = self.zero(t[0].order());
        for i in 0..n {
            for j in 0..n {
                acc += &(&self.ginv[i * n + j] * &t[i * n + j]);
            }
        }
        acc
    }

    /// `X^i = g^{ij} X_j`.
    pub fn raise(&self, x: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        (0..n)
            .map(|i| jet::sum((0..n).map(|j| &self.ginv[i * n + j] * &x[j])).expect("n > 0"))
            .collect()
    }

    /// `g(X, Y)` for two covectors.
    pub fn inner(&self, x: &[Jet], y: &[Jet]) -> Jet {
        let n = self.n;
        let mut acc = self.zero(x[0].order().min(y[0].order()));
        for i in 0..n {
            for j in 0..n {
                acc += &(&(&self.ginv[i * n + j] * &x[i]) * &y[j]);
            }
        }
        acc
    }

    /// `|X|²_g` for a covector.
    pub fn norm2(&self, x: &[Jet]) -> Jet {
        self.inner(x, x)
    }

    /// `g^{ac} g^{bd} s_ab t_cd`.
    pub fn inner2(&self, s: &[Jet], t: &[Jet]) -> Jet {
        let n = self.n;
        // raise both indices of t first: t^{ab}
        let mut up = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut acc = self.zero(t[0].order());
                for c in 0..n {
                    for d in 0..n {
                        acc += &(&(&self.ginv[a * n + c] * &self.ginv[b * n + d]) * &t[c * n + d]);
                    }
                }
                up.push(acc);
            }
        }
        jet::sum(s.iter().zip(&up).map(|(x, y)| x * y)).expect("n > 0")
    }

    /// Covector of partial derivatives `∂_i f`.
    pub fn gradient(&self, f: &Jet) -> Vec<Jet> {
        (0..self.n).map(|i| f.d(i)).collect()
    }

    /// `∇_i X_j = ∂_i X_j − Γ^k_ij X_k` at `i*n + j`.
    pub fn nabla_covector(&self, x: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut v = x[j].d(i);
                for k in 0..n {
                    v -= &(self.gam(k, i, j) * &x[k]);
                }
                out.push(v);
            }
        }
        out
    }

    /// `∇_a t_bc = ∂_a t_bc − Γ^k_ab t_kc − Γ^k_ac t_bk` at `a*n*n + b*n + c`.
    pub fn nabla_bilinear(&self, t: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut v = t[b * n + c].d(a);
                    for k in 0..n {
                        v -= &(self.gam(k, a, b) * &t[k * n + c]);
                        v -= &(self.gam(k, a, c) * &t[b * n + k]);
                    }
                    out.push(v);
                }
            }
        }
        out
    }

    /// `∇^j t_ij = g^{jk} ∇_k t_ij` (divergence on the second index).
    pub fn divergence_bilinear(&self, t: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let nt = self.nabla_bilinear(t);
        (0..n)
            .map(|i| {
                let mut acc = self.zero(nt[0].order());
                for j in 0..n {
                    for k in 0..n {
                        acc += &(&self.ginv[j * n + k] * &nt[(k * n + i) * n + j]);
                    }
                }
                acc
            })
            .collect()
    }

    /// `div X = g^{ij} ∇_i X_j`.
    pub fn divergence(&self, x: &[Jet]) -> Jet {
        self.trace(&self.nabla_covector(x))
    }

    /// `∇_i ∇_j f`.
    pub fn hessian(&self, f: &Jet) -> Vec<Jet> {
        self.nabla_covector(&self.gradient(f))
    }

    pub fn laplacian(&self, f: &Jet) -> Jet {
        self.trace(&self.hessian(f))
    }

    /// `g^{ab} ∇_a ∇_b X_c`.
    pub fn rough_laplacian(&self, x: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let second = self.nabla_bilinear(&self.nabla_covector(x));
        (0..n)
            .map(|c| {
                let mut acc = self.zero(second[0].order());
                for a in 0..n {
                    for b in 0..n {
                        acc += &(&self.ginv[a * n + b] * &second[(a * n + b) * n + c]);
                    }
                }
                acc
            })
            .collect()
    }

    /// Contracted Bianchi combination `∇^j (R_ij − ½ R g_ij)`; needs a
    /// metric of order three.
    pub fn bianchi(&self) -> Vec<Jet> {
        let ric = self.ricci();
        let r = self.trace(&ric);
        let einstein: Vec<Jet> = ric
            .iter()
            .zip(&self.g)
            .map(|(rc, g)| rc - &(&r * g).scale(0.5))
            .collect();
        self.divergence_bilinear(&einstein)
    }

    /// Orthonormal Frobenius norm for Riemannian metrics, component sup-norm
    /// for Lorentzian ones.
    pub fn residual_norm(&self, valence: Valence, components: &[f64]) -> Result<f64> {
        match self.signature {
            Signature::Riemannian => self.orthonormal_norm(valence, components),
            Signature::Lorentzian => Ok(components.iter().fold(0.0, |m, c| m.max(c.abs()))),
        }
    }

    /// Frobenius norm in a `g`-orthonormal frame of a tensor of the given
    /// valence (covariant indices after contravariant ones, as in
    /// [`PointValue`]).
    pub fn orthonormal_norm(&self, valence: Valence, components: &[f64]) -> Result<f64> {
        if self.signature != Signature::Riemannian {
            return Err(Error::Precondition(
                "orthonormal norm needs a Riemannian metric; use the sup norm".into(),
            ));
        }
        let n = self.n;
        let gv: Vec<f64> = self.g.iter().map(Jet::value).collect();
        let l = cholesky(&gv, n).ok_or(Error::SingularMetric { point: vec![] })?;
        // covariant index: t(e_a) with frame e_a = L^{-T} columns
        // contravariant index: θ^a(t) = L^T t
        let linv_t = lower_inverse(&l, n);
        let mut t = components.to_vec();
        let rank = valence.rank();
        for slot in 0..rank {
            let covariant = slot >= valence.contravariant;
            t = transform_slot(&t, n, rank, slot, |a, i| {
                if covariant {
                    // (L^{-T})_{i a} = (L^{-1})_{a i}
                    linv_t[a * n + i]
                } else {
                    // (L^T)_{a i} = L_{i a}
                    l[i * n + a]
                }
            });
        }
        Ok(t.iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

// Applies out[.. a ..] = Σ_i m(a, i) t[.. i ..] on one index slot.
fn transform_slot(t: &[f64], n: usize, rank: usize, slot: usize, m: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let stride = n.pow((rank - slot - 1) as u32);
    let mut out = vec![0.0; t.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let a = (idx / stride) % n;
        let base = idx - a * stride;
        *o = (0..n).map(|i| m(a, i) * t[base + i * stride]).sum();
    }
    out
}

fn christoffel_jets(g: &[Jet], ginv: &[Jet], n: usize) -> Vec<Jet> {
    // dg[l][i][j] = ∂_l g_ij
    let dg: Vec<Jet> = (0..n)
        .flat_map(|l| (0..n * n).map(move |ij| (l, ij)))
        .map(|(l, ij)| g[ij].d(l))
        .collect();
    let dgi = |l: usize, i: usize, j: usize| &dg[(l * n + i) * n + j];
    // first kind: Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut first = vec![Jet::zero(n, 0); n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = (&(dgi(i, j, l) + dgi(j, i, l)) - dgi(l, i, j)).scale(0.5);
                first[(l * n + j) * n + i] = v.clone();
                first[(l * n + i) * n + j] = v;
            }
        }
    }
    let mut out = vec![Jet::zero(n, 0); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = jet::sum((0..n).map(|l| &ginv[k * n + l] * &first[(l * n + i) * n + j]))
                    .expect("n > 0");
                out[(k * n + j) * n + i] = v.clone();
                out[(k * n + i) * n + j] = v;
            }
        }
    }
    out
}

/// Gauss–Jordan inverse of a jet matrix with partial pivoting on values.
pub fn invert(m: &[Jet], n: usize) -> Option<Vec<Jet>> {
    let scale = m.iter().fold(0.0f64, |s, x| s.max(x.value().abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let dim = m[0].dim();
    let order = m[0].order();
    let mut a: Vec<Jet> = m.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| Jet::constant(dim, order, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| {
                a[x * n + col]
                    .value()
                    .abs()
                    .total_cmp(&a[y * n + col].value().abs())
            })
            .expect("non-empty");
        if a[pivot * n + col].value().abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let r = a[col * n + col].recip();
        for k in 0..n {
            a[col * n + k] = &a[col * n + k] * &r;
            inv[col * n + k] = &inv[col * n + k] * &r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row * n + col].clone();
            if factor.coefficients().iter().all(|&c| c == 0.0) {
                continue;
            }
            for k in 0..n {
                let da = &factor * &a[col * n + k];
                a[row * n + k] -= &da;
                let di = &factor * &inv[col * n + k];
                inv[row * n + k] -= &di;
            }
        }
    }
    Some(inv)
}

/// Lower-triangular `L` with `g = L Lᵀ`, or `None` if `g` is not positive
/// definite.
pub fn cholesky(g: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = g[i * n + i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (g[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn lower_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    for col in 0..n {
        for i in col..n {
            let rhs = if i == col { 1.0 } else { 0.0 };
            let s: f64 = (col..i).map(|k| l[i * n + k] * inv[k * n + col]).sum();
            inv[i * n + col] = (rhs - s) / l[i * n + i];
        }
    }
    inv
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &[f64], n: usize) -> Vec<f64> {
    let mut a = m.to_vec();
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn check_signature(g: &[f64], n: usize, signature: Signature, p: &[f64]) -> Result<()> {
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("metric at {p:?}")));
    }
    let ev = symmetric_eigenvalues(g, n);
    let scale = ev.iter().fold(0.0f64, |s, e| s.max(e.abs()));
    if scale == 0.0 || ev.iter().any(|e| e.abs() <= 1e-12 * scale) {
        return Err(Error::SingularMetric { point: p.to_vec() });
    }
    let negatives = ev.iter().filter(|&&e| e < 0.0).count();
    let expected = match signature {
        Signature::Riemannian => 0,
        Signature::Lorentzian => 1,
    };
    if negatives != expected {
        return Err(Error::SignatureMismatch {
            point: p.to_vec(),
            expected: signature.name().into(),
        });
    }
    Ok(())
}

pub(crate) fn require_same_chart(a: &TensorField, b: &TensorField) -> Result<()> {
    if a.chart() != b.chart() && **a.chart() != **b.chart() {
        return Err(Error::ValenceMismatch("fields live on different charts".into()));
    }
    Ok(())
}

pub(crate) fn require_valence(f: &TensorField, v: Valence, what: &str) -> Result<()> {
    if f.valence() != v {
        return Err(Error::ValenceMismatch(format!(
            "{what} must have valence {v}, got {}",
            f.valence()
        )));
    }
    Ok(())
}

pub(crate) fn scalar_jet(f: &TensorField, p: &[f64], order: usize) -> Result<Jet> {
    require_valence(f, Valence::SCALAR, "function")?;
    Ok(f.jets(p, order)?.remove(0))
}

pub(crate) fn covector_jets(x: &TensorField, p: &[f64], order: usize) -> Result<Vec<Jet>> {
    require_valence(x, Valence::COVECTOR, "one-form")?;
    x.jets(p, order)
}

/// `Γ^k_ij` at `p`, valence (2,1).
pub fn christoffel(g: &TensorField, p: &[f64]) -> Result<PointValue> {
    let geo = Geometry::at(g, p, 1)?;
    PointValue::from_jets(p, Valence::new(2, 1), geo.christoffel())
}

pub fn ricci(g: &TensorField, p: &[f64]) -> Result<PointValue> {
    let geo = Geometry::at(g, p, 2)?;
    PointValue::from_jets(p, Valence::BILINEAR, &geo.ricci())
}

pub fn scalar_curvature(g: &TensorField, p: &[f64]) -> Result<f64> {
    let geo = Geometry::at(g, p, 2)?;
    Ok(geo.trace(&geo.ricci()).value())
}

/// `£_X g = ∇_i X_j + ∇_j X_i` for a one-form `X`.
pub fn lie_derivative_metric(x: &TensorField, g: &TensorField, p: &[f64]) -> Result<PointValue> {
    require_same_chart(x, g)?;
    let xj = covector_jets(x, p, 1)?;
    let geo = Geometry::at(g, p, 1)?;
    let nx = geo.nabla_covector(&xj);
    let n = geo.dim();
    let sym: Vec<f64> = (0..n * n)
        .map(|k| nx[k].value() + nx[(k % n) * n + k / n].value())
        .collect();
    PointValue::new(p, Valence::BILINEAR, sym)
}

/// Exterior derivative of a k-form given by fully antisymmetric components
/// (a function counts as a 0-form).
pub fn exterior_derivative(omega: &TensorField, p: &[f64]) -> Result<PointValue> {
    let n = omega.dim();
    let k = omega.valence().covariant;
    if omega.valence().contravariant != 0 {
        return Err(Error::ValenceMismatch("exterior derivative needs a form".into()));
    }
    if k + 1 > n {
        return Err(Error::ValenceMismatch(format!(
            "a {}-form does not exist in dimension {n}",
            k + 1
        )));
    }
    let jets = omega.jets(p, 1)?;
    let len = n.pow(k as u32 + 1);
    let mut out = vec![0.0; len];
    for (idx, o) in out.iter_mut().enumerate() {
        let mut digits = vec![0usize; k + 1];
        let mut rest = idx;
        for d in digits.iter_mut().rev() {
            *d = rest % n;
            rest /= n;
        }
        let mut acc = 0.0;
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let sub = digits
                .iter()
                .enumerate()
                .filter(|&(pos, _)| pos != j)
                .fold(0, |a, (_, &d)| a * n + d);
            acc += sign * jets[sub].gradient(digits[j]);
        }
        *o = acc;
    }
    PointValue::new(p, Valence::new(k + 1, 0), out)
}

pub fn divergence(x: &TensorField, g: &TensorField, p: &[f64]) -> Result<f64> {
    require_same_chart(x, g)?;
    let xj = covector_jets(x, p, 1)?;
    let geo = Geometry::at(g, p, 1)?;
    Ok(geo.divergence(&xj).value())
}

pub fn hessian(f: &TensorField, g: &TensorField, p: &[f64]) -> Result<PointValue> {
    require_same_chart(f, g)?;
    let fj = scalar_jet(f, p, 2)?;
    let geo = Geometry::at(g, p, 1)?;
    PointValue::from_jets(p, Valence::BILINEAR, &geo.hessian(&fj))
}

pub fn laplacian(f: &TensorField, g: &TensorField, p: &[f64]) -> Result<f64> {
    require_same_chart(f, g)?;
    let fj = scalar_jet(f, p, 2)?;
    let geo = Geometry::at(g, p, 1)?;
    Ok(geo.laplacian(&fj).value())
}

pub fn rough_laplacian(x: &TensorField, g: &TensorField, p: &[f64]) -> Result<PointValue> {
    require_same_chart(x, g)?;
    let xj = covector_jets(x, p, 2)?;
    let geo = Geometry::at(g, p, 2)?;
    PointValue::from_jets(p, Valence::COVECTOR, &geo.rough_laplacian(&xj))
}

/// `∇^j (R_ij − ½ R g_ij)`, zero for every smooth metric.
pub fn contracted_bianchi(g: &TensorField, p: &[f64]) -> Result<PointValue> {
    let geo = Geometry::at(g, p, 3)?;
    PointValue::from_jets(p, Valence::COVECTOR, &geo.bianchi())
}

/// Frobenius norm of `t` in a `g`-orthonormal frame at `t.point`.
pub fn orthonormal_norm(t: &PointValue, g: &TensorField) -> Result<f64> {
    let geo = Geometry::at(g, &t.point, 0)?;
    geo.orthonormal_norm(t.valence, &t.components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Chart, Coordinate};
    use crate::expr::parse_in;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn chart2(a: Coordinate, b: Coordinate) -> Arc<Chart> {
        Arc::new(Chart::new(vec![a, b], Signature::Riemannian).unwrap())
    }

    fn metric(chart: &Arc<Chart>, comps: [&str; 4]) -> TensorField {
        let names: Vec<String> = chart.names();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let exprs = comps.iter().map(|c| parse_in(c, &names, &[]).unwrap()).collect();
        TensorField::symmetric(chart.clone(), exprs).unwrap()
    }

    fn sphere() -> TensorField {
        let c = chart2(
            Coordinate::new("th", 0.0, PI),
            Coordinate::periodic("ph", 0.0, 2.0 * PI),
        );
        metric(&c, ["1", "0", "0", "sin(th)^2"])
    }

    #[test]
    fn sphere_connection_and_curvature() {
        let g = sphere();
        let p = [PI / 3.0, 0.0];
        let gamma = christoffel(&g, &p).unwrap();
        let s = (PI / 3.0).sin();
        let c = (PI / 3.0).cos();
        assert!((gamma.get(&[0, 1, 1]) + s * c).abs() < 1e-14);
        assert!((gamma.get(&[1, 0, 1]) - c / s).abs() < 1e-14);
        assert!((gamma.get(&[1, 1, 0]) - c / s).abs() < 1e-14);
        let ric = ricci(&g, &p).unwrap();
        assert!((ric.get(&[0, 0]) - 1.0).abs() < 1e-13);
        assert!((ric.get(&[1, 1]) - s * s).abs() < 1e-13);
        assert!((scalar_curvature(&g, &p).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn hyperbolic_plane_curvature() {
        let c = chart2(Coordinate::new("x", -1.0, 1.0), Coordinate::new("y", 0.5, 1.5));
        let g = metric(&c, ["1/(2*y^2)", "0", "0", "1/(2*y^2)"]);
        let p = [0.2, 0.9];
        assert!((scalar_curvature(&g, &p).unwrap() + 4.0).abs() < 1e-12);
        let ric = ricci(&g, &p).unwrap();
        assert!((ric.get(&[0, 0]) + 2.0 / (2.0 * 0.81)).abs() < 1e-12);
    }

    #[test]
    fn lie_derivative_and_exterior_derivative_on_flat_plane() {
        let c = chart2(Coordinate::new("x", -1.0, 1.0), Coordinate::new("y", -1.0, 1.0));
        let g = metric(&c, ["1", "0", "0", "1"]);
        let x = TensorField::covector(
            c.clone(),
            vec![parse_in("x", &["x", "y"], &[]).unwrap(), parse_in("0", &["x", "y"], &[]).unwrap()],
        )
        .unwrap();
        let lie = lie_derivative_metric(&x, &g, &[0.3, 0.4]).unwrap();
        assert_eq!(lie.components, vec![2.0, 0.0, 0.0, 0.0]);

        let w = TensorField::covector(
            c.clone(),
            vec![parse_in("0", &["x", "y"], &[]).unwrap(), parse_in("x", &["x", "y"], &[]).unwrap()],
        )
        .unwrap();
        let dw = exterior_derivative(&w, &[0.1, 0.2]).unwrap();
        assert_eq!(dw.components, vec![0.0, 1.0, -1.0, 0.0]);
        assert!(exterior_derivative(&dw_field(&c), &[0.0, 0.0]).is_err());
    }

    fn dw_field(c: &Arc<Chart>) -> TensorField {
        let z = parse_in("0", &["x", "y"], &[]).unwrap();
        let one = parse_in("1", &["x", "y"], &[]).unwrap();
        TensorField::two_form(c.clone(), vec![z.clone(), one.clone(), crate::expr::neg(one), z]).unwrap()
    }

    #[test]
    fn orthonormal_norms() {
        let g = sphere();
        let p = [1.0, 0.5];
        let gv = PointValue::new(&p, Valence::BILINEAR, vec![1.0, 0.0, 0.0, 1.0f64.sin().powi(2)]).unwrap();
        assert!((orthonormal_norm(&gv, &g).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        // X ⊗ X with |X|² = 4
        let s = 1.0f64.sin();
        let xx = PointValue::new(&p, Valence::BILINEAR, vec![0.0, 0.0, 0.0, 4.0 * s * s]).unwrap();
        assert!((orthonormal_norm(&xx, &g).unwrap() - 4.0).abs() < 1e-13);
        // a vector: |∂_φ| = sin θ
        let v = PointValue::new(&p, Valence::new(0, 1), vec![0.0, 1.0]).unwrap();
        assert!((orthonormal_norm(&v, &g).unwrap() - s).abs() < 1e-14);
    }

    #[test]
    fn jet_inverse_and_eigenvalues() {
        let m = [4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, -2.0];
        let ev = symmetric_eigenvalues(&m, 3);
        let trace: f64 = ev.iter().sum();
        assert!((trace - 5.0).abs() < 1e-12);
        assert_eq!(ev.iter().filter(|&&e| e < 0.0).count(), 1);
        let jets: Vec<Jet> = m.iter().map(|&v| Jet::constant(2, 1, v)).collect();
        let inv = invert(&jets, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| m[i * 3 + k] * inv[k * 3 + j].value()).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bianchi_vanishes_on_deformed_sphere() {
        let c = chart2(
            Coordinate::new("th", 0.0, PI),
            Coordinate::periodic("ph", 0.0, 2.0 * PI),
        );
        let g = metric(&c, ["exp(sin(th)*cos(ph)/3)", "0", "0", "exp(sin(th)*cos(ph)/3)*sin(th)^2"]);
        let b = contracted_bianchi(&g, &[1.1, 0.7]).unwrap();
        assert!(b.sup_norm() < 1e-12, "{b:?}");
    }

    #[test]
    fn singular_and_wrong_signature_metrics_are_rejected() {
        let c = chart2(Coordinate::new("x", -1.0, 1.0), Coordinate::new("y", -1.0, 1.0));
        let g = metric(&c, ["x", "0", "0", "1"]);
        assert!(matches!(ricci(&g, &[0.0, 0.0]), Err(Error::SingularMetric { .. })));
        assert!(matches!(ricci(&g, &[-0.5, 0.0]), Err(Error::SignatureMismatch { .. })));
        assert!(matches!(ricci(&g, &[5.0, 0.0]), Err(Error::PointOutOfRange { .. })));
    }
}
