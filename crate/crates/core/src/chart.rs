//! Coordinate boxes with periodicity flags, and the sample grids laid on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::MAX_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    Riemannian,
    Lorentzian,
}

impl Signature {
    pub fn name(self) -> &'static str {
        match self {
            Signature::Riemannian => "riemannian",
            Signature::Lorentzian => "lorentzian",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coordinate {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Coordinate {
    pub fn new(name: &str, lo: f64, hi: f64) -> Self {
        Coordinate {
            name: name.to_string(),
            lo,
            hi,
            periodic: false,
        }
    }

    pub fn periodic(name: &str, lo: f64, hi: f64) -> Self {
        Coordinate {
            periodic: true,
            ..Coordinate::new(name, lo, hi)
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    coords: Vec<Coordinate>,
    signature: Signature,
}

impl Chart {
    pub fn new(coords: Vec<Coordinate>, signature: Signature) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Config(format!(
                "chart dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            if !(c.lo.is_finite() && c.hi.is_finite() && c.lo < c.hi) {
                return Err(Error::Config(format!(
                    "coordinate `{}` has empty or non-finite range [{}, {}]",
                    c.name, c.lo, c.hi
                )));
            }
            if coords[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::Config(format!("duplicate coordinate `{}`", c.name)));
            }
        }
        Ok(Chart { coords, signature })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn names(&self) -> Vec<String> {
        self.coords.iter().map(|c| c.name.clone()).collect()
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn period(&self, axis: usize) -> Option<f64> {
        let c = &self.coords[axis];
        c.periodic.then(|| c.width())
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.coords.iter().all(|c| c.periodic)
    }

    pub fn center(&self) -> Vec<f64> {
        self.coords.iter().map(|c| 0.5 * (c.lo + c.hi)).collect()
    }

    /// Maps a coordinate value into the chart, wrapping periodic axes.
    /// Returns `None` when a non-periodic value leaves `[lo, hi]`.
    pub fn wrap(&self, axis: usize, x: f64) -> Option<f64> {
        let c = &self.coords[axis];
        if c.periodic {
            let w = c.width();
            let mut y = x;
            if y < c.lo || y >= c.hi {
                y = c.lo + (y - c.lo).rem_euclid(w);
            }
            Some(y)
        } else if x >= c.lo && x <= c.hi {
            Some(x)
        } else {
            None
        }
    }

    /// Checks that `p` lies at least `margin` inside every non-periodic face.
    pub fn check_interior(&self, p: &[f64], margin: f64) -> Result<()> {
        let inside = p.len() == self.dim()
            && self.coords.iter().zip(p).all(|(c, &x)| {
                x.is_finite() && (c.periodic || (x - margin >= c.lo && x + margin <= c.hi))
            });
        if inside {
            Ok(())
        } else {
            Err(Error::PointOutOfRange { point: p.to_vec() })
        }
    }

    /// Sample grid with `n` nodes on each active axis (fewer above three
    /// active axes) and one node at the midpoint of each inactive axis.
    /// Non-periodic axes are sampled on `[lo + margin, hi - margin]`.
    pub fn grid(&self, n: usize, active: &[bool], margin: f64) -> Grid {
        let active_count = active.iter().filter(|&&a| a).count();
        let per_axis = nodes_per_axis(n, active_count);
        let axes = self
            .coords
            .iter()
            .zip(active)
            .map(|(c, &on)| {
                if !on {
                    return vec![0.5 * (c.lo + c.hi)];
                }
                let (lo, hi) = if c.periodic {
                    (c.lo, c.hi)
                } else {
                    (c.lo + margin, c.hi - margin)
                };
                let step = (hi - lo) / per_axis as f64;
                (0..per_axis).map(|k| lo + (k as f64 + 0.5) * step).collect()
            })
            .collect();
        Grid { axes }
    }
}

/// Node count per axis: `n` up to three active axes, then
/// `max(8, round(n^(3/d)))` to keep the total near `n^3`.
pub fn nodes_per_axis(n: usize, active: usize) -> usize {
    if active <= 3 {
        n
    } else {
        let scaled = (n as f64).powf(3.0 / active as f64).round() as usize;
        scaled.max(8)
    }
}

/// Tensor-product sample grid, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn from_axes(axes: Vec<Vec<f64>>) -> Self {
        Grid { axes }
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.axes.len()];
        for (axis, nodes) in self.axes.iter().enumerate().rev() {
            p[axis] = nodes[index % nodes.len()];
            index /= nodes.len();
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Chart {
        Chart::new(
            vec![
                Coordinate::periodic("t", 0.0, 1.0),
                Coordinate::new("x", -1.0, 1.0),
            ],
            Signature::Riemannian,
        )
        .unwrap()
    }

    #[test]
    fn wrap_periodic_only() {
        let c = square();
        assert!((c.wrap(0, 1.25).unwrap() - 0.25).abs() < 1e-15);
        assert!((c.wrap(0, -0.25).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(c.wrap(1, 0.5), Some(0.5));
        assert_eq!(c.wrap(1, 1.5), None);
    }

    #[test]
    fn grid_is_cell_centered_and_row_major() {
        let g = square().grid(4, &[true, true], 0.0);
        assert_eq!(g.shape(), vec![4, 4]);
        assert_eq!(g.point(0), vec![0.125, -0.75]);
        assert_eq!(g.point(1), vec![0.125, -0.25]);
        assert_eq!(g.point(15), vec![0.875, 0.75]);
    }

    #[test]
    fn inactive_axes_collapse_to_midpoint() {
        let g = square().grid(8, &[false, true], 0.0);
        assert_eq!(g.shape(), vec![1, 8]);
        assert_eq!(g.point(3)[0], 0.5);
    }

    #[test]
    fn high_dimensional_node_count() {
        assert_eq!(nodes_per_axis(24, 3), 24);
        assert_eq!(nodes_per_axis(24, 5), 8);
        assert_eq!(nodes_per_axis(64, 4), 23);
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(Chart::new(vec![Coordinate::new("x", 1.0, 1.0)], Signature::Riemannian).is_err());
        assert!(Chart::new(
            vec![Coordinate::new("x", 0.0, 1.0), Coordinate::new("x", 0.0, 1.0)],
            Signature::Riemannian
        )
        .is_err());
    }
}
