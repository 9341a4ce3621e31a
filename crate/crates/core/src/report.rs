//! Verification reports and deterministic grid sweeps.

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::chart::Grid;
use crate::error::{Error, Result};
use crate::field::{Backend, TensorField};

/// Version tag of the JSON report layout.
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    HypothesesFailed,
    Error,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::HypothesesFailed => "hypotheses-failed",
            Status::Error => "error",
        }
    }
}

/// Geometry name with its parameters in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryRef {
    pub name: String,
    pub params: Vec<(String, f64)>,
}

impl GeometryRef {
    pub fn new(name: &str, params: &[(&str, f64)]) -> Self {
        GeometryRef {
            name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

impl std::fmt::Display for GeometryRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.params.is_empty() {
            let list: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", list.join(", "))?;
        }
        Ok(())
    }
}

impl Serialize for GeometryRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        struct Params<'a>(&'a [(String, f64)]);
        impl Serialize for Params<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(Some(self.0.len()))?;
                for (k, v) in self.0 {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("name", &self.name)?;
        map.serialize_entry("params", &Params(&self.params))?;
        map.end()
    }
}

/// Residual statistics over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Stats {
    pub max: f64,
    pub mean: f64,
    pub argmax: Vec<f64>,
}

impl Stats {
    /// A single value at a single point.
    pub fn single(value: f64, point: Vec<f64>) -> Self {
        Stats {
            max: value,
            mean: value,
            argmax: point,
        }
    }
}

/// One named check on one geometry.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub geometry: GeometryRef,
    pub grid: Vec<usize>,
    pub backend: String,
    pub h: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub argmax: Option<Vec<f64>>,
    pub tolerance: f64,
    pub status: Status,
    pub informational: bool,
    pub anchor: String,
    pub note: String,
    pub measured: Option<f64>,
    pub expected: Option<f64>,
}

impl VerificationReport {
    /// Pass iff `stats.max <= tolerance`.
    pub fn from_stats(
        check: &str,
        geometry: &GeometryRef,
        grid: &Grid,
        backend: Backend,
        stats: Stats,
        tolerance: f64,
        anchor: &str,
    ) -> Self {
        let status = if stats.max <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        VerificationReport {
            check: check.to_string(),
            geometry: geometry.clone(),
            grid: grid.shape(),
            backend: backend.name().to_string(),
            h: backend.step(),
            max: Some(stats.max),
            mean: Some(stats.mean),
            argmax: Some(stats.argmax),
            tolerance,
            status,
            informational: false,
            anchor: anchor.to_string(),
            note: String::new(),
            measured: None,
            expected: None,
        }
    }

    /// A row recording that the check could not be evaluated.
    pub fn error(check: &str, geometry: &GeometryRef, backend: Backend, tolerance: f64, anchor: &str, err: &Error) -> Self {
        VerificationReport {
            check: check.to_string(),
            geometry: geometry.clone(),
            grid: Vec::new(),
            backend: backend.name().to_string(),
            h: backend.step(),
            max: None,
            mean: None,
            argmax: None,
            tolerance,
            status: Status::Error,
            informational: false,
            anchor: anchor.to_string(),
            note: err.to_string(),
            measured: None,
            expected: None,
        }
    }

    /// Marks the row as conditional on hypotheses that did not hold; the
    /// statistics are kept for inspection but carry no verdict.
    pub fn hypotheses_failed(mut self, why: &str) -> Self {
        self.status = Status::HypothesesFailed;
        self.append_note(why);
        self
    }

    /// Tags the row as an expected-nonzero illustration that never gates.
    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.append_note(note);
        self
    }

    pub fn with_values(mut self, measured: Option<f64>, expected: Option<f64>) -> Self {
        self.measured = measured;
        self.expected = expected;
        self
    }

    fn append_note(&mut self, note: &str) {
        if note.is_empty() {
            return;
        }
        if !self.note.is_empty() {
            self.note.push_str("; ");
        }
        self.note.push_str(note);
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Whether this row makes a suite fail.
    pub fn gates(&self) -> bool {
        !self.informational && matches!(self.status, Status::Fail | Status::Error)
    }

    pub fn text_line(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3e}"));
        let tag = if self.informational { " [info]" } else { "" };
        let mut line = format!(
            "{:<18} {:<40} {:<34} max={:<10} tol={:.1e} {}{}",
            self.status.as_str(),
            self.check,
            self.geometry.to_string(),
            fmt(self.max),
            self.tolerance,
            self.backend,
            tag
        );
        if let (Some(m), Some(e)) = (self.measured, self.expected) {
            line.push_str(&format!(" measured={m:.9} expected={e:.9}"));
        }
        if !self.note.is_empty() {
            line.push_str(&format!(" ({})", self.note));
        }
        line
    }
}

/// A suite run: the serialized top-level object.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub version: u32,
    pub suite: String,
    pub reports: Vec<VerificationReport>,
}

impl SuiteReport {
    pub fn new(suite: &str, reports: Vec<VerificationReport>) -> Self {
        SuiteReport {
            version: REPORT_VERSION,
            suite: suite.to_string(),
            reports,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("suite {} ({} checks)\n", self.suite, self.reports.len());
        for r in &self.reports {
            out.push_str(&r.text_line());
            out.push('\n');
        }
        let failed = self.reports.iter().filter(|r| r.gates()).count();
        out.push_str(&format!("{failed} gating failure(s)\n"));
        out
    }

    /// 0 when nothing gates, 1 on a failed check, 2 when any check errored.
    pub fn exit_code(&self) -> i32 {
        let gating: Vec<&VerificationReport> = self.reports.iter().filter(|r| r.gates()).collect();
        if gating.iter().any(|r| r.status == Status::Error) {
            2
        } else if gating.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Grid density, tolerance override and axis collapsing shared by every
/// grid check.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampling {
    pub n: usize,
    pub tolerance: Option<f64>,
    /// Sample axes no field depends on at a single midpoint.
    pub collapse_ignorable: bool,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            n: 24,
            tolerance: None,
            collapse_ignorable: true,
        }
    }
}

impl Sampling {
    pub fn with_n(n: usize) -> Self {
        Sampling {
            n,
            ..Sampling::default()
        }
    }

    pub fn tolerance(&self, backend: Backend) -> f64 {
        self.tolerance.unwrap_or_else(|| backend.tolerance())
    }

    /// Grid on the chart of `fields[0]`, kept clear of non-periodic faces by
    /// the reach of third-order stencils.
    pub fn grid(&self, fields: &[&TensorField]) -> Grid {
        let chart = fields[0].chart();
        let backend = fields[0].backend();
        let active: Vec<bool> = (0..chart.dim())
            .map(|a| !self.collapse_ignorable || fields.iter().any(|f| f.depends_on(a)))
            .collect();
        chart.grid(self.n, &active, backend.reach(3))
    }
}

/// Evaluates `f` at every grid point in parallel, returning rows in grid
/// order. The first error in grid order wins.
pub fn sweep_values<F>(grid: &Grid, columns: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let rows: Vec<Result<Vec<f64>>> = (0..grid.len())
        .into_par_iter()
        .map(|i| f(&grid.point(i)))
        .collect();
    let mut values = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        debug_assert_eq!(row.len(), columns);
        if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "residual {bad} at {:?}",
                grid.point(i)
            )));
        }
        values.push(row);
    }
    Ok(values)
}

/// Max (first occurrence), pairwise mean and argmax of one column.
pub fn column_stats(grid: &Grid, rows: &[Vec<f64>], column: usize) -> Stats {
    let values: Vec<f64> = rows.iter().map(|r| r[column]).collect();
    let (imax, max) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    Stats {
        max,
        mean: pairwise_sum(&values) / values.len() as f64,
        argmax: grid.point(imax),
    }
}

/// [`sweep_values`] reduced to per-column statistics.
pub fn sweep<F>(grid: &Grid, columns: usize, f: F) -> Result<Vec<Stats>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let rows = sweep_values(grid, columns, f)?;
    Ok((0..columns).map(|c| column_stats(grid, &rows, c)).collect())
}

/// Sum by recursive halving; the order depends only on the length.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_reduces_in_grid_order() {
        let grid = Grid::from_axes(vec![vec![0.0, 1.0, 2.0], vec![5.0, 6.0]]);
        let stats = sweep(&grid, 2, |p| Ok(vec![(p[0] - 1.0).abs(), 3.0])).unwrap();
        assert_eq!(stats[0].max, 1.0);
        // first occurrence of the maximum
        assert_eq!(stats[0].argmax, vec![0.0, 5.0]);
        assert!((stats[0].mean - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(stats[1].argmax, vec![0.0, 5.0]);
    }

    #[test]
    fn sweep_reports_first_error_and_non_finite() {
        let grid = Grid::from_axes(vec![vec![0.0, 1.0, 2.0]]);
        let err = sweep(&grid, 1, |p| {
            if p[0] > 0.5 {
                Err(Error::Precondition(format!("at {}", p[0])))
            } else {
                Ok(vec![0.0])
            }
        })
        .unwrap_err();
        assert_eq!(err, Error::Precondition("at 1".into()));
        assert!(sweep(&grid, 1, |_| Ok(vec![f64::NAN])).is_err());
    }

    #[test]
    fn json_layout_is_fixed() {
        let grid = Grid::from_axes(vec![vec![0.5]]);
        let r = VerificationReport::from_stats(
            "demo",
            &GeometryRef::new("flat_torus", &[("n", 2.0), ("c", 0.0)]),
            &grid,
            Backend::Analytic,
            Stats::single(0.0, vec![0.5]),
            1e-9,
            "demo anchor",
        );
        let json = SuiteReport::new("x", vec![r]).to_json();
        let check = json.find("\"check\"").unwrap();
        let geometry = json.find("\"geometry\"").unwrap();
        let status = json.find("\"status\"").unwrap();
        assert!(check < geometry && geometry < status);
        assert!(json.find("\"n\"").unwrap() < json.find("\"c\"").unwrap());
        assert!(json.contains("\"status\": \"pass\""));
    }

    #[test]
    fn exit_codes() {
        let grid = Grid::from_axes(vec![vec![0.5]]);
        let g = GeometryRef::new("g", &[]);
        let row = |v: f64| {
            VerificationReport::from_stats("c", &g, &grid, Backend::Analytic, Stats::single(v, vec![0.5]), 1.0, "")
        };
        assert_eq!(SuiteReport::new("s", vec![row(0.5)]).exit_code(), 0);
        assert_eq!(SuiteReport::new("s", vec![row(2.0)]).exit_code(), 1);
        assert_eq!(SuiteReport::new("s", vec![row(2.0).informational()]).exit_code(), 0);
        let err = VerificationReport::error("c", &g, Backend::Analytic, 1.0, "", &Error::Config("x".into()));
        assert_eq!(SuiteReport::new("s", vec![row(2.0), err]).exit_code(), 2);
        assert_eq!(SuiteReport::new("s", vec![row(2.0).hypotheses_failed("h")]).exit_code(), 0);
    }
}
