//! Truncated multivariate Taylor polynomials.
//!
//! A [`Jet`] of order `k` at a point `p` stores the Taylor coefficients
//! `c_α = ∂^α f(p) / α!` for every multi-index with `|α| ≤ k`. Products are
//! truncated at the lower of the two operand orders, and [`Jet::d`] lowers the
//! order by one. Curvature quantities are assembled from metric jets with this
//! arithmetic, so every derived quantity automatically carries exactly as many
//! derivatives as its inputs allow.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

/// Largest chart dimension supported by jets.
pub const MAX_DIM: usize = 6;
/// Largest derivative order carried by jets.
pub const MAX_ORDER: usize = 3;

type Exponents = [u8; MAX_DIM];

/// Monomial ordering and multiplication tables for one `(dim, order)` pair.
///
/// Monomials are graded by total degree, so the layout of a lower order is a
/// prefix of every higher-order layout with the same dimension.
pub struct JetLayout {
    dim: usize,
    order: usize,
    monomials: Vec<Exponents>,
    products: Vec<(u16, u16, u16)>,
    // per axis: (source monomial, target monomial, exponent factor)
    derivs: Vec<Vec<(u16, u16, f64)>>,
}

impl JetLayout {
    fn build(dim: usize, order: usize) -> Self {
        let mut monomials: Vec<Exponents> = Vec::new();
        for degree in 0..=order {
            let mut current = [0u8; MAX_DIM];
            push_degree(dim, degree, 0, &mut current, &mut monomials);
        }
        let index_of = |e: &Exponents| monomials.iter().position(|m| m == e);

        let mut products = Vec::new();
        for (a, ea) in monomials.iter().enumerate() {
            for (b, eb) in monomials.iter().enumerate() {
                let da = degree(ea);
                let db = degree(eb);
                if da + db > order {
                    continue;
                }
                let mut sum = [0u8; MAX_DIM];
                for k in 0..dim {
                    sum[k] = ea[k] + eb[k];
                }
                let out = index_of(&sum).expect("product monomial in layout");
                products.push((a as u16, b as u16, out as u16));
            }
        }

        let mut derivs = vec![Vec::new(); dim];
        for (axis, table) in derivs.iter_mut().enumerate() {
            for (src, e) in monomials.iter().enumerate() {
                if e[axis] == 0 {
                    continue;
                }
                let mut lowered = *e;
                lowered[axis] -= 1;
                let tgt = index_of(&lowered).expect("lowered monomial in layout");
                table.push((src as u16, tgt as u16, f64::from(e[axis])));
            }
        }

        JetLayout {
            dim,
            order,
            monomials,
            products,
            derivs,
        }
    }

    fn len(&self) -> usize {
        self.monomials.len()
    }
}

fn degree(e: &Exponents) -> usize {
    e.iter().map(|&v| v as usize).sum()
}

// Enumerates exponent vectors of a fixed degree in reverse-lexicographic order
// (x0 first), which keeps axis monomials at indices 1..=dim.
fn push_degree(dim: usize, remaining: usize, axis: usize, cur: &mut Exponents, out: &mut Vec<Exponents>) {
    if axis + 1 == dim || dim == 0 {
        if dim > 0 {
            cur[axis] = remaining as u8;
        } else if remaining > 0 {
            return;
        }
        out.push(*cur);
        if dim > 0 {
            cur[axis] = 0;
        }
        return;
    }
    for k in (0..=remaining).rev() {
        cur[axis] = k as u8;
        push_degree(dim, remaining - k, axis + 1, cur, out);
    }
    cur[axis] = 0;
}

fn layout(dim: usize, order: usize) -> &'static JetLayout {
    static LAYOUTS: OnceLock<Vec<Vec<JetLayout>>> = OnceLock::new();
    assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
    assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
    let all = LAYOUTS.get_or_init(|| {
        (0..=MAX_DIM)
            .map(|d| (0..=MAX_ORDER).map(|k| JetLayout::build(d, k)).collect())
            .collect()
    });
    &all[dim][order]
}

/// Number of Taylor coefficients of a jet with the given dimension and order.
pub fn coefficient_count(dim: usize, order: usize) -> usize {
    layout(dim, order).len()
}

/// Multi-indices (as exponent vectors truncated to `dim`) in storage order.
pub fn multi_indices(dim: usize, order: usize) -> Vec<Vec<u8>> {
    layout(dim, order)
        .monomials
        .iter()
        .map(|m| m[..dim].to_vec())
        .collect()
}

/// A truncated Taylor polynomial in `dim` variables.
#[derive(Clone)]
pub struct Jet {
    layout: &'static JetLayout,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.layout.dim)
            .field("order", &self.layout.order)
            .field("coeffs", &self.c)
            .finish()
    }
}

impl Jet {
    pub fn constant(dim: usize, order: usize, value: f64) -> Self {
        let layout = layout(dim, order);
        let mut c = vec![0.0; layout.len()];
        c[0] = value;
        Jet { layout, c }
    }

    pub fn zero(dim: usize, order: usize) -> Self {
        Self::constant(dim, order, 0.0)
    }

    /// The coordinate function `x_axis` expanded about `at`.
    pub fn variable(dim: usize, order: usize, axis: usize, at: f64) -> Self {
        let mut j = Self::constant(dim, order, at);
        if order > 0 {
            j.c[1 + axis] = 1.0;
        }
        j
    }

    /// Builds a jet from coefficients in the order given by [`multi_indices`].
    pub fn from_coefficients(dim: usize, order: usize, coeffs: Vec<f64>) -> Self {
        let layout = layout(dim, order);
        assert_eq!(coeffs.len(), layout.len(), "coefficient count mismatch");
        Jet { layout, c: coeffs }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// First partial derivative `∂_axis f` at the expansion point.
    pub fn gradient(&self, axis: usize) -> f64 {
        assert!(self.order() >= 1, "gradient of an order-0 jet");
        self.c[1 + axis]
    }

    /// Partial derivative for an arbitrary multi-index given as a list of axes,
    /// e.g. `[0, 0, 1]` for `∂_0 ∂_0 ∂_1`.
    pub fn partial(&self, axes: &[usize]) -> f64 {
        assert!(axes.len() <= self.order(), "derivative order exceeds jet order");
        let mut e = [0u8; MAX_DIM];
        for &a in axes {
            e[a] += 1;
        }
        let idx = self
            .layout
            .monomials
            .iter()
            .position(|m| *m == e)
            .expect("monomial present");
        let factorial: f64 = e.iter().map(|&k| (1..=k as u32).product::<u32>() as f64).product();
        self.c[idx] * factorial
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let layout = layout(self.dim(), order);
        Jet {
            layout,
            c: self.c[..layout.len()].to_vec(),
        }
    }

    /// The jet of the restriction to the coordinate subspace through the
    /// expansion point spanned by `axes`, in the order given.
    pub fn restrict(&self, axes: &[usize]) -> Jet {
        let target = layout(axes.len(), self.order());
        let c = target
            .monomials
            .iter()
            .map(|m| {
                let mut e = [0u8; MAX_DIM];
                for (k, &a) in axes.iter().enumerate() {
                    e[a] = m[k];
                }
                let idx = self.layout.monomials.iter().position(|x| *x == e);
                self.c[idx.expect("monomial present")]
            })
            .collect();
        Jet { layout: target, c }
    }

    /// Partial derivative with respect to `axis`, one order lower.
    pub fn d(&self, axis: usize) -> Jet {
        let order = self.order();
        assert!(order >= 1, "cannot differentiate an order-0 jet");
        let target = layout(self.dim(), order - 1);
        let mut c = vec![0.0; target.len()];
        for &(src, tgt, factor) in &self.layout.derivs[axis] {
            c[tgt as usize] += factor * self.c[src as usize];
        }
        Jet { layout: target, c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            layout: self.layout,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    /// Multiplicative inverse via the terminating geometric series of the
    /// nilpotent part.
    pub fn recip(&self) -> Jet {
        let b0 = self.c[0];
        let inv0 = 1.0 / b0;
        let mut t = self.scale(-inv0);
        t.c[0] = 0.0;
        let mut sum = Jet::constant(self.dim(), self.order(), 1.0);
        for _ in 0..self.order() {
            sum = (&t * &sum).add_scalar(1.0);
        }
        sum.scale(inv0)
    }

    fn mul_into(a: &Jet, b: &Jet) -> Jet {
        debug_assert_eq!(a.dim(), b.dim());
        let order = a.order().min(b.order());
        let layout = layout(a.dim(), order);
        let mut c = vec![0.0; layout.len()];
        for &(i, j, o) in &layout.products {
            c[o as usize] += a.c[i as usize] * b.c[j as usize];
        }
        Jet { layout, c }
    }

    fn zip(a: &Jet, b: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(a.dim(), b.dim());
        let order = a.order().min(b.order());
        let layout = layout(a.dim(), order);
        let c = (0..layout.len()).map(|k| f(a.c[k], b.c[k])).collect();
        Jet { layout, c }
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet::zip(self, rhs, |x, y| x + y)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet::zip(self, rhs, |x, y| x - y)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul_into(self, rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.order() < self.order() {
            *self = &*self + rhs;
        } else {
            for (a, b) in self.c.iter_mut().zip(&rhs.c) {
                *a += b;
            }
        }
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self += &rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.order() < self.order() {
            *self = &*self - rhs;
        } else {
            for (a, b) in self.c.iter_mut().zip(&rhs.c) {
                *a -= b;
            }
        }
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self -= &rhs;
    }
}

/// Sum of jets; `None` for an empty iterator.
pub fn sum(items: impl IntoIterator<Item = Jet>) -> Option<Jet> {
    let mut it = items.into_iter();
    let first = it.next()?;
    Some(it.fold(first, |acc, x| acc + x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly_xy(order: usize, x: f64, y: f64) -> (Jet, Jet) {
        (Jet::variable(2, order, 0, x), Jet::variable(2, order, 1, y))
    }

    #[test]
    fn layout_sizes_match_binomials() {
        assert_eq!(coefficient_count(2, 3), 10);
        assert_eq!(coefficient_count(3, 3), 20);
        assert_eq!(coefficient_count(5, 2), 21);
        assert_eq!(coefficient_count(0, 3), 1);
    }

    #[test]
    fn product_matches_hand_derivatives() {
        // f = x^2 y at (2, 3): f_x = 2xy = 12, f_xx = 2y = 6, f_xy = 2x = 4, f_xxy = 2
        let (x, y) = poly_xy(3, 2.0, 3.0);
        let f = &(&x * &x) * &y;
        assert_eq!(f.value(), 12.0);
        assert_eq!(f.partial(&[0]), 12.0);
        assert_eq!(f.partial(&[1]), 4.0);
        assert_eq!(f.partial(&[0, 0]), 6.0);
        assert_eq!(f.partial(&[0, 1]), 4.0);
        assert_eq!(f.partial(&[0, 0, 1]), 2.0);
        assert_eq!(f.partial(&[1, 1]), 0.0);
    }

    #[test]
    fn derivative_lowers_order() {
        let (x, y) = poly_xy(3, 1.5, -0.5);
        let f = &(&x * &y) * &y;
        let fy = f.d(1);
        assert_eq!(fy.order(), 2);
        // ∂_y (x y^2) = 2 x y
        assert!((fy.value() - 2.0 * 1.5 * -0.5).abs() < 1e-15);
        assert!((fy.partial(&[0, 1]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn reciprocal_series() {
        // 1/(1 + x) about x = 0.5: derivatives (-1)^k k! / 1.5^(k+1)
        let x = Jet::variable(1, 3, 0, 0.5);
        let r = x.add_scalar(1.0).recip();
        let b: f64 = 1.5;
        assert!((r.value() - 1.0 / b).abs() < 1e-15);
        assert!((r.partial(&[0]) + 1.0 / b.powi(2)).abs() < 1e-14);
        assert!((r.partial(&[0, 0]) - 2.0 / b.powi(3)).abs() < 1e-14);
        assert!((r.partial(&[0, 0, 0]) + 6.0 / b.powi(4)).abs() < 1e-13);
    }

    #[test]
    fn mixed_orders_truncate() {
        let a = Jet::variable(2, 3, 0, 1.0);
        let b = Jet::variable(2, 1, 1, 2.0);
        let s = &a + &b;
        assert_eq!(s.order(), 1);
        let p = &a * &b;
        assert_eq!(p.order(), 1);
        assert_eq!(p.value(), 2.0);
    }
}
