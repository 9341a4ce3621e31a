//! Product quadrature on charts: periodic trapezoid and Gauss-Legendre.

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::report::pairwise_sum;

/// One-dimensional scheme used along an axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisRule {
    /// Equal weights on a periodic axis; spectrally accurate for smooth data.
    Trapezoid,
    /// Gauss-Legendre on a closed interval; endpoints are never sampled.
    GaussLegendre,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product rule over a chart.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    schemes: Vec<AxisRule>,
    nodes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

impl QuadratureRule {
    /// `n` nodes on every axis with the given schemes. Trapezoid axes must be
    /// periodic.
    pub fn new(chart: &Chart, schemes: &[AxisRule], n: usize) -> Result<Self> {
        Self::with_counts(chart, schemes, &vec![n; chart.dim()])
    }

    pub fn with_counts(chart: &Chart, schemes: &[AxisRule], counts: &[usize]) -> Result<Self> {
        if schemes.len() != chart.dim() || counts.len() != chart.dim() {
            return Err(Error::Quadrature(format!(
                "{} schemes for a {}-dimensional chart",
                schemes.len(),
                chart.dim()
            )));
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for ((c, &rule), &n) in chart.coords().iter().zip(schemes).zip(counts) {
            if n == 0 {
                return Err(Error::Quadrature("zero nodes on an axis".into()));
            }
            match rule {
                AxisRule::Trapezoid => {
                    if !c.periodic {
                        return Err(Error::Quadrature(format!(
                            "trapezoid rule on non-periodic axis `{}`",
                            c.name
                        )));
                    }
                    let w = c.width() / n as f64;
                    nodes.push((0..n).map(|k| c.lo + k as f64 * w).collect());
                    weights.push(vec![w; n]);
                }
                AxisRule::GaussLegendre => {
                    let (x, w) = gauss_legendre(n);
                    let half = 0.5 * c.width();
                    let mid = 0.5 * (c.lo + c.hi);
                    nodes.push(x.iter().map(|t| mid + half * t).collect());
                    weights.push(w.iter().map(|v| v * half).collect());
                }
            }
        }
        Ok(QuadratureRule {
            schemes: schemes.to_vec(),
            nodes,
            weights,
        })
    }

    pub fn schemes(&self) -> &[AxisRule] {
        &self.schemes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.nodes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn node(&self, mut index: usize) -> (Vec<f64>, f64) {
        let d = self.nodes.len();
        let mut p = vec![0.0; d];
        let mut w = 1.0;
        for axis in (0..d).rev() {
            let k = index % self.nodes[axis].len();
            index /= self.nodes[axis].len();
            p[axis] = self.nodes[axis][k];
            w *= self.weights[axis][k];
        }
        (p, w)
    }

    /// `∫ f dV_g`, with the volume density `sqrt|det g|` taken from `metric`.
    pub fn integrate<F>(&self, metric: &TensorField, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        Ok(self.integrate_many(metric, 1, |p| Ok(vec![f(p)?]))?[0])
    }

    /// `∫ f_k dV_g` for the `count` integrands returned together by `f`.
    pub fn integrate_many<F>(&self, metric: &TensorField, count: usize, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        if metric.dim() != self.nodes.len() {
            return Err(Error::Quadrature("metric and rule dimensions differ".into()));
        }
        let n = metric.dim();
        let terms: Vec<Result<Vec<f64>>> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let (p, w) = self.node(i);
                let g = metric.values(&p)?;
                let scale = w * determinant(&g, n).abs().sqrt();
                let v = f(&p)?;
                debug_assert_eq!(v.len(), count);
                Ok(v.into_iter().map(|x| scale * x).collect())
            })
            .collect();
        let terms = terms.into_iter().collect::<Result<Vec<Vec<f64>>>>()?;
        (0..count)
            .map(|k| {
                let column: Vec<f64> = terms.iter().map(|t| t[k]).collect();
                let total = pairwise_sum(&column);
                if total.is_finite() {
                    Ok(total)
                } else {
                    Err(Error::NonFinite("quadrature sum".into()))
                }
            })
            .collect()
    }

    /// Integral of a scalar field.
    pub fn integrate_field(&self, field: &TensorField, metric: &TensorField) -> Result<f64> {
        if field.valence().rank() != 0 {
            return Err(Error::ValenceMismatch("integrand must be a scalar".into()));
        }
        self.integrate(metric, |p| Ok(field.values(p)?[0]))
    }

    pub fn volume(&self, metric: &TensorField) -> Result<f64> {
        self.integrate(metric, |_| Ok(1.0))
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &[f64], n: usize) -> f64 {
    let mut a = m.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let pivot = (c..n)
            .max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))
            .unwrap_or(c);
        if a[pivot * n + c] == 0.0 {
            return 0.0;
        }
        if pivot != c {
            for k in 0..n {
                a.swap(c * n + k, pivot * n + k);
            }
            det = -det;
        }
        det *= a[c * n + c];
        for r in c + 1..n {
            let factor = a[r * n + c] / a[c * n + c];
            for k in c..n {
                a[r * n + k] -= factor * a[c * n + k];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        // Degree 9 is the exactness limit for five nodes.
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((integral - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(w.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn even_node_counts_are_symmetric() {
        let (x, _) = gauss_legendre(4);
        assert!((x[0] + x[3]).abs() < 1e-15 && (x[1] + x[2]).abs() < 1e-15);
        assert!((x[2] - (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn determinant_of_permuted_matrix() {
        let m = [0.0, 2.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 4.0];
        assert!((determinant(&m, 3) + 24.0).abs() < 1e-14);
    }
}
