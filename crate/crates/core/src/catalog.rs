//! Named, parameterized geometries with their claimed constants.
//!
//! Every entry is generated as `qespec` text and instantiated through the
//! same path as user files, so the catalog and the file format cannot drift.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::chart::{Chart, Coordinate, Signature};
use crate::error::{Error, Result};
use crate::expr::{mul, neg, num, parse_in, Expr};
use crate::field::{Backend, TensorField};
use crate::nhg::{assemble_exprs, spacetime_chart};
use crate::quadrature::{AxisRule, QuadratureRule};
use crate::report::GeometryRef;
use crate::specfile::{parse_spec_text, GeometrySpec};

/// Constants a geometry is claimed to satisfy.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expected {
    pub lambda: Option<f64>,
    pub m: Option<f64>,
    pub mu: Option<f64>,
    /// Spacetime cosmological constant.
    pub cosmological: Option<f64>,
    pub y: Option<f64>,
}

/// Electromagnetic data on the assembled spacetime `(v, r, x)`.
#[derive(Clone, Debug)]
pub struct MatterData {
    /// `2 dv (dr + r X + r^2 Y dv / 2) + g`.
    pub spacetime: TensorField,
    /// Field strength two-form.
    pub maxwell: TensorField,
}

#[derive(Clone, Debug)]
pub struct GeometryEntry {
    pub name: String,
    pub params: Vec<(String, f64)>,
    pub chart: Arc<Chart>,
    pub metric: TensorField,
    pub x: Option<TensorField>,
    pub f: Option<TensorField>,
    pub y: Option<TensorField>,
    pub expected: Expected,
    pub matter: Option<MatterData>,
    /// Per-axis schemes when the chart covers a closed manifold.
    pub quadrature: Option<Vec<AxisRule>>,
    pub anchor: String,
    pub summary: String,
    /// Provenance of the expected constants and known caveats.
    pub notes: Vec<String>,
    pub spec: GeometrySpec,
}

impl GeometryEntry {
    pub fn geometry_ref(&self) -> GeometryRef {
        GeometryRef {
            name: self.name.clone(),
            params: self.params.clone(),
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `X`, or the zero one-form when none is declared.
    pub fn x_or_zero(&self) -> TensorField {
        self.x.clone().unwrap_or_else(|| {
            TensorField::covector(self.chart.clone(), vec![num(0.0); self.dim()])
                .expect("zero covector")
                .with_backend(self.metric.backend())
        })
    }

    /// Same geometry with every field switched to `backend`.
    pub fn with_backend(&self, backend: Backend) -> GeometryEntry {
        let sw = |f: &Option<TensorField>| f.as_ref().map(|t| t.with_backend(backend));
        GeometryEntry {
            metric: self.metric.with_backend(backend),
            x: sw(&self.x),
            f: sw(&self.f),
            y: sw(&self.y),
            matter: self.matter.as_ref().map(|m| MatterData {
                spacetime: m.spacetime.with_backend(backend),
                maxwell: m.maxwell.with_backend(backend),
            }),
            ..self.clone()
        }
    }

    pub fn backend(&self) -> Backend {
        self.metric.backend()
    }

    /// Product rule with `n` nodes per axis, if the chart is closed.
    pub fn quadrature_rule(&self, n: usize) -> Result<QuadratureRule> {
        let schemes = self.quadrature.as_ref().ok_or_else(|| {
            Error::Quadrature(format!("`{}` has no global quadrature chart", self.name))
        })?;
        QuadratureRule::new(&self.chart, schemes, n)
    }

    /// Trapezoid on every axis when the chart is fully periodic.
    pub(crate) fn with_default_quadrature(mut self) -> Self {
        if self.chart.is_fully_periodic() {
            self.quadrature = Some(vec![AxisRule::Trapezoid; self.dim()]);
        }
        self
    }
}

/// A declared parameter with its default and admissible range.
#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub range: &'static str,
    valid: fn(f64) -> bool,
}

/// Registry record for one named family.
pub struct CatalogItem {
    pub name: &'static str,
    pub summary: &'static str,
    pub anchor: &'static str,
    pub params: &'static [ParamSpec],
    pub claims: &'static [&'static str],
    build: fn(&Params) -> Result<GeometryEntry>,
}

/// Resolved parameter values in declaration order.
pub struct Params(Vec<(String, f64)>);

impl Params {
    fn get(&self, name: &str) -> f64 {
        self.0.iter().find(|(k, _)| k == name).map(|(_, v)| *v).expect("declared parameter")
    }

    fn usize(&self, name: &str) -> usize {
        self.get(name) as usize
    }
}

fn positive(v: f64) -> bool {
    v > 0.0
}
fn nonnegative(v: f64) -> bool {
    v >= 0.0
}
fn negative(v: f64) -> bool {
    v < 0.0
}
fn nonzero(v: f64) -> bool {
    v != 0.0
}
fn any(_: f64) -> bool {
    true
}
fn int_1_6(v: f64) -> bool {
    v.fract() == 0.0 && (1.0..=6.0).contains(&v)
}
fn int_2_6(v: f64) -> bool {
    v.fract() == 0.0 && (2.0..=6.0).contains(&v)
}
fn int_2_4(v: f64) -> bool {
    v.fract() == 0.0 && (2.0..=4.0).contains(&v)
}

const fn p(name: &'static str, default: f64, range: &'static str, valid: fn(f64) -> bool) -> ParamSpec {
    ParamSpec {
        name,
        default,
        range,
        valid,
    }
}

const TWO_PI: f64 = 2.0 * PI;

static REGISTRY: &[CatalogItem] = &[
    CatalogItem {
        name: "flat_torus",
        summary: "flat n-torus of periods 2π with the parallel one-form X = c dx1",
        anchor: "flat torus",
        params: &[
            p("n", 2.0, "integer in 1..=6", int_1_6),
            p("c", 0.0, "real", any),
        ],
        claims: &["λ = 0 when c = 0", "c ≠ 0 is not a quasi-Einstein solution: Ric_X = −(c²/m) dx1²"],
        build: flat_torus,
    },
    CatalogItem {
        name: "round_sphere",
        summary: "round n-sphere of radius ℓ in hyperspherical coordinates",
        anchor: "Einstein sphere",
        params: &[
            p("n", 2.0, "integer in 2..=6", int_2_6),
            p("ell", 1.0, "ℓ > 0", positive),
        ],
        claims: &["Ric = ((n−1)/ℓ²) g", "X = 0, λ = (n−1)/ℓ²"],
        build: round_sphere,
    },
    CatalogItem {
        name: "hyperbolic_surface",
        summary: "constant-curvature surface (dx² + dy²)/(|κ| y²) on a local chart",
        anchor: "constant negative curvature surface",
        params: &[p("kappa", -1.0, "κ < 0", negative)],
        claims: &["R = 2κ", "Ric = κ g, λ = κ with X = 0"],
        build: hyperbolic_surface,
    },
    CatalogItem {
        name: "lim_product",
        summary: "S¹ × Σ with g = dΦ² + (1/m) g_H, X = m dΦ",
        anchor: "closed non-exact quasi-Einstein product",
        params: &[p("m", 2.0, "m > 0", positive)],
        claims: &[
            "λ = −m",
            "X closed, not exact: ∮ X dΦ = 2πm",
            "div X = 0, |X|² = −mλ, R = (n−1)λ",
            "Y = λ + ½|X|² = m²/2 − m, zero at m = 2",
        ],
        build: lim_product,
    },
    CatalogItem {
        name: "xbtz_product",
        summary: "extreme BTZ × Σ, five-dimensional vacuum spacetime",
        anchor: "extreme BTZ product spacetime",
        params: &[p("a", 0.25, "a > 0", positive)],
        claims: &["Ric = −2𝐠, Λ = −3"],
        build: xbtz_product,
    },
    CatalogItem {
        name: "xbtz_nhg",
        summary: "near-horizon limit of the extreme BTZ product",
        anchor: "near-horizon extreme BTZ product",
        params: &[p("a", 0.25, "a > 0", positive)],
        claims: &["Λ = −3", "a = ¼ agrees with the assembled lim_product(m = 2) data under r ↦ r/2"],
        build: xbtz_nhg,
    },
    CatalogItem {
        name: "sds_cylinder",
        summary: "gradient cylinder dψ²/F + F dτ², F = 1 − a^(m−1)/ψ^(m−1) − (m−1)λψ²/((m+1)μ)",
        anchor: "Schwarzschild-de Sitter type gradient cylinder",
        params: &[
            p("m", 2.0, "m > 0, m ≠ 1", positive),
            p("lambda", 1.0, "real", any),
            p("mu", 1.0, "μ ≠ 0", nonzero),
            p("a", 0.0, "a ≥ 0", nonnegative),
        ],
        claims: &[
            "X = df with f = −m log ψ",
            "solves the quasi-Einstein equation with λ_eff = (m−1)λ/μ",
            "characteristic constant μ_eff = m − 1; equals the nominal μ when (m−1)/μ = 1",
        ],
        build: sds_cylinder,
    },
    CatalogItem {
        name: "maxwell_sphere",
        summary: "round n-sphere with radial electric field 𝐅 = c dr∧dv",
        anchor: "electrovacuum sphere",
        params: &[
            p("n", 2.0, "integer in 2..=4", int_2_4),
            p("c", 1.0, "real", any),
            p("lambda", 1.0, "λ + 2c²/n > 0", any),
        ],
        claims: &[
            "ℓ² = (n−1)/(λ + 2c²/n)",
            "T = c² g, T₊₋ = −c² from the displayed stress formula",
            "λ̃ = λ − (2/n)T₊₋ and Ric = λ̃ g",
        ],
        build: maxwell_sphere,
    },
    CatalogItem {
        name: "maxwell_circle_sigma",
        summary: "S¹ × Σ_K with magnetic field √3 k dVol_Σ, K = −2(1 − 2k²)",
        anchor: "magnetic circle bundle solution",
        params: &[p("k", 0.5, "real", any)],
        claims: &[
            "g = (1+k²) dΦ² + g_Σ, X = 2(1+k²) dΦ, λ = −2",
            "T = 3k² g_Σ − 3k²(1+k²) dΦ², T₊₋ = −3k² from the displayed stress formula",
            "Y = 0",
        ],
        build: maxwell_circle_sigma,
    },
    CatalogItem {
        name: "minkowski",
        summary: "flat Lorentzian space diag(−1, 1, …, 1)",
        anchor: "Minkowski space",
        params: &[p("n", 4.0, "integer in 2..=6", int_2_6)],
        claims: &["Λ = 0"],
        build: minkowski,
    },
];

/// Registry in its fixed listing order.
pub fn list() -> &'static [CatalogItem] {
    REGISTRY
}

pub fn item(name: &str) -> Result<&'static CatalogItem> {
    REGISTRY
        .iter()
        .find(|i| i.name == name)
        .ok_or_else(|| Error::UnknownGeometry(name.to_string()))
}

/// Builds `name` with `overrides` applied to its default parameters.
pub fn get(name: &str, overrides: &[(String, f64)]) -> Result<GeometryEntry> {
    let item = item(name)?;
    let mut values: Vec<(String, f64)> =
        item.params.iter().map(|p| (p.name.to_string(), p.default)).collect();
    for (k, v) in overrides {
        let slot = values.iter_mut().find(|(p, _)| p == k).ok_or_else(|| {
            Error::UnknownParameter {
                geometry: name.to_string(),
                name: k.clone(),
            }
        })?;
        slot.1 = *v;
    }
    for (spec, (_, v)) in item.params.iter().zip(&values) {
        if !v.is_finite() || !(spec.valid)(*v) {
            return Err(Error::ParamOutOfRange {
                name: spec.name.to_string(),
                value: *v,
                reason: spec.range.to_string(),
            });
        }
    }
    let mut entry = (item.build)(&Params(values.clone()))?;
    entry.name = item.name.to_string();
    entry.params = values;
    entry.anchor = item.anchor.to_string();
    entry.summary = item.summary.to_string();
    entry.notes.extend(item.claims.iter().map(|c| c.to_string()));
    Ok(entry)
}

/// Convenience form of [`get`] with `&str` keys.
pub fn get_with(name: &str, params: &[(&str, f64)]) -> Result<GeometryEntry> {
    let owned: Vec<(String, f64)> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    get(name, &owned)
}

/// Human-readable description of a registry entry at its defaults.
pub fn describe(name: &str) -> Result<String> {
    let item = item(name)?;
    let entry = get(name, &[])?;
    let mut s = String::new();
    let _ = writeln!(s, "{}: {}", item.name, item.summary);
    let _ = writeln!(s, "anchor: {}", item.anchor);
    let _ = writeln!(s, "parameters:");
    for p in item.params {
        let _ = writeln!(s, "  {} = {} ({})", p.name, p.default, p.range);
    }
    let _ = writeln!(
        s,
        "chart ({}, dimension {}):",
        entry.chart.signature().name(),
        entry.dim()
    );
    for c in entry.chart.coords() {
        let _ = writeln!(
            s,
            "  {} in [{}, {}]{}",
            c.name,
            c.lo,
            c.hi,
            if c.periodic { " periodic" } else { "" }
        );
    }
    let mut fields = vec!["g"];
    if entry.x.is_some() {
        fields.push("X");
    }
    if entry.f.is_some() {
        fields.push("f");
    }
    if entry.y.is_some() {
        fields.push("Y");
    }
    if entry.matter.is_some() {
        fields.push("spacetime metric, F");
    }
    let _ = writeln!(s, "fields: {}", fields.join(", "));
    let _ = writeln!(s, "expected at defaults:");
    let e = &entry.expected;
    for (label, v) in [
        ("λ", e.lambda),
        ("m", e.m),
        ("μ", e.mu),
        ("Λ", e.cosmological),
        ("Y", e.y),
    ] {
        if let Some(v) = v {
            let _ = writeln!(s, "  {label} = {v}");
        }
    }
    let _ = writeln!(s, "claims:");
    for c in item.claims {
        let _ = writeln!(s, "  {c}");
    }
    if let Some(q) = &entry.quadrature {
        let names: Vec<&str> = q
            .iter()
            .map(|r| match r {
                AxisRule::Trapezoid => "trapezoid",
                AxisRule::GaussLegendre => "gauss-legendre",
            })
            .collect();
        let _ = writeln!(s, "quadrature: {}", names.join(" x "));
    }
    Ok(s)
}

struct SpecText {
    text: String,
}

impl SpecText {
    fn new(name: &str, params: &[(&str, f64)], signature: Signature, coords: &[Coordinate]) -> Self {
        let mut text = format!("qespec 1\nname {name}\n");
        for (k, v) in params {
            let _ = writeln!(text, "param {k} = {v}");
        }
        let _ = writeln!(text, "chart {{\n  signature {}", signature.name());
        for c in coords {
            let _ = writeln!(
                text,
                "  coord {} {} {}{}",
                c.name,
                c.lo,
                c.hi,
                if c.periodic { " periodic" } else { "" }
            );
        }
        text.push_str("}\nfields {\n");
        SpecText { text }
    }

    fn field(mut self, line: &str) -> Self {
        let _ = writeln!(self.text, "  {line}");
        self
    }

    fn expect(mut self, lines: &[&str]) -> Self {
        self.text.push_str("}\nexpect {\n");
        for l in lines {
            let _ = writeln!(self.text, "  {l}");
        }
        self
    }

    fn build(mut self) -> Result<GeometryEntry> {
        self.text.push_str("}\n");
        parse_spec_text(&self.text)?.instantiate(&[])
    }
}

fn flat_torus(p: &Params) -> Result<GeometryEntry> {
    let n = p.usize("n");
    let c = p.get("c");
    let coords: Vec<Coordinate> =
        (1..=n).map(|i| Coordinate::periodic(&format!("x{i}"), 0.0, TWO_PI)).collect();
    let mut s = SpecText::new("flat_torus", &[("n", n as f64), ("c", c)], Signature::Riemannian, &coords);
    for i in 1..=n {
        s = s.field(&format!("g x{i} x{i} = 1"));
    }
    s = s.field("X x1 = c");
    let mut expect = vec!["m = 2"];
    if c == 0.0 {
        expect.push("lambda = 0");
        expect.push("Y = 0");
    }
    s.expect(&expect).build()
}

fn sphere_coords(n: usize) -> Vec<Coordinate> {
    let mut coords: Vec<Coordinate> = if n == 2 {
        vec![Coordinate::new("theta", 0.0, PI)]
    } else {
        (1..n).map(|i| Coordinate::new(&format!("theta{i}"), 0.0, PI)).collect()
    };
    coords.push(Coordinate::periodic("phi", 0.0, TWO_PI));
    coords
}

/// Metric lines `ℓ² (dθ1² + sin²θ1 dθ2² + …)` with `scale` standing for ℓ².
fn sphere_fields(mut s: SpecText, coords: &[Coordinate], scale: &str) -> SpecText {
    let mut factor = String::new();
    for c in coords {
        s = s.field(&format!("g {0} {0} = {scale}{factor}", c.name));
        let _ = write!(factor, "*sin({})^2", c.name);
    }
    s
}

fn sphere_quadrature(mut entry: GeometryEntry) -> GeometryEntry {
    let n = entry.dim();
    let mut rules = vec![AxisRule::GaussLegendre; n - 1];
    rules.push(AxisRule::Trapezoid);
    entry.quadrature = Some(rules);
    entry
}

fn round_sphere(p: &Params) -> Result<GeometryEntry> {
    let n = p.usize("n");
    let coords = sphere_coords(n);
    let s = SpecText::new(
        "round_sphere",
        &[("n", n as f64), ("ell", p.get("ell"))],
        Signature::Riemannian,
        &coords,
    );
    let s = sphere_fields(s, &coords, "ell^2");
    let entry = s.expect(&["lambda = (n-1)/ell^2", "m = 2", "Y = (n-1)/ell^2"]).build()?;
    Ok(sphere_quadrature(entry))
}

/// Unit-radius-scaled stereographic chart `4ℓ²(du² + dv²)/(1 + u² + v²)²` of
/// the round 2-sphere, used for chart-invariance checks. Not in the registry.
pub fn sphere_stereographic(ell: f64) -> Result<GeometryEntry> {
    let coords = [Coordinate::new("u", -2.0, 2.0), Coordinate::new("w", -2.0, 2.0)];
    let mut entry = SpecText::new("sphere_stereographic", &[("ell", ell)], Signature::Riemannian, &coords)
        .field("g u u = 4*ell^2/(1+u^2+w^2)^2")
        .field("g w w = 4*ell^2/(1+u^2+w^2)^2")
        .expect(&["lambda = 1/ell^2"])
        .build()?;
    entry.anchor = "Einstein sphere".into();
    entry.summary = "round 2-sphere in stereographic coordinates".into();
    Ok(entry)
}

/// Hyperspherical `(θ, φ)` of the point with stereographic coordinates `(u, w)`.
pub fn stereographic_to_spherical(u: f64, w: f64) -> [f64; 2] {
    let s = u * u + w * w;
    let theta = ((s - 1.0) / (s + 1.0)).acos();
    let phi = w.atan2(u).rem_euclid(TWO_PI);
    [theta, phi]
}

fn hyperbolic_surface(p: &Params) -> Result<GeometryEntry> {
    let coords = [Coordinate::new("x", -1.0, 1.0), Coordinate::new("y", 0.5, 1.5)];
    SpecText::new("hyperbolic_surface", &[("kappa", p.get("kappa"))], Signature::Riemannian, &coords)
        .field("g x x = -1/(kappa*y^2)")
        .field("g y y = -1/(kappa*y^2)")
        .expect(&["lambda = kappa", "m = 2", "Y = kappa"])
        .build()
}

fn lim_coords() -> [Coordinate; 3] {
    [
        Coordinate::periodic("phi", 0.0, TWO_PI),
        Coordinate::new("x", -1.0, 1.0),
        Coordinate::new("y", 0.5, 1.5),
    ]
}

fn lim_product(p: &Params) -> Result<GeometryEntry> {
    SpecText::new("lim_product", &[("m", p.get("m"))], Signature::Riemannian, &lim_coords())
        .field("g phi phi = 1")
        .field("g x x = 1/(m*y^2)")
        .field("g y y = 1/(m*y^2)")
        .field("X phi = m")
        .expect(&["lambda = -m", "m = m", "Y = m^2/2 - m"])
        .build()
}

fn xbtz_coords() -> Vec<Coordinate> {
    vec![
        Coordinate::periodic("v", 0.0, 1.0),
        Coordinate::new("r", 0.0, 1.0),
        Coordinate::periodic("phi", 0.0, TWO_PI),
        Coordinate::new("x", -1.0, 1.0),
        Coordinate::new("y", 0.5, 1.5),
    ]
}

fn xbtz_product(p: &Params) -> Result<GeometryEntry> {
    SpecText::new("xbtz_product", &[("a", p.get("a"))], Signature::Lorentzian, &xbtz_coords())
        .field("g v r = 1/sqrt(r+a)")
        .field("g v phi = 4*r")
        .field("g phi phi = 4*(r+a)")
        .field("g x x = 1/(2*y^2)")
        .field("g y y = 1/(2*y^2)")
        .expect(&["Lambda = -3"])
        .build()
}

fn xbtz_nhg(p: &Params) -> Result<GeometryEntry> {
    let mut coords = xbtz_coords();
    coords[1] = Coordinate::new("r", -1.0, 1.0);
    SpecText::new("xbtz_nhg", &[("a", p.get("a"))], Signature::Lorentzian, &coords)
        .field("g v r = 1/sqrt(a)")
        .field("g v phi = 4*r")
        .field("g phi phi = 4*a")
        .field("g x x = 1/(2*y^2)")
        .field("g y y = 1/(2*y^2)")
        .expect(&["Lambda = -3"])
        .build()
}

/// `F(ψ)` of the gradient cylinder; the `a` term is absent when `a = 0`.
pub fn sds_profile(m: f64, lambda: f64, mu: f64, a: f64, psi: f64) -> f64 {
    let horizon = if a == 0.0 { 0.0 } else { (a / psi).powf(m - 1.0) };
    1.0 - horizon - (m - 1.0) * lambda / ((m + 1.0) * mu) * psi * psi
}

/// Longest interval in `[0.1, 4]` on which `F > 0`, shrunk by 5% of its
/// length at each end.
pub fn sds_interval(m: f64, lambda: f64, mu: f64, a: f64) -> Option<(f64, f64)> {
    const LO: f64 = 0.1;
    const HI: f64 = 4.0;
    const SAMPLES: usize = 4000;
    let f = |psi: f64| sds_profile(m, lambda, mu, a, psi);
    let at = |k: usize| LO + (HI - LO) * k as f64 / SAMPLES as f64;
    let root = |mut lo: f64, mut hi: f64| {
        // f(lo) and f(hi) have opposite signs.
        let lo_pos = f(lo) > 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == lo_pos {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut best: Option<(f64, f64)> = None;
    let mut start: Option<f64> = None;
    for k in 0..=SAMPLES {
        let x = at(k);
        let positive = f(x) > 0.0;
        match (positive, start) {
            (true, None) => start = Some(if k == 0 { LO } else { root(at(k - 1), x) }),
            (false, Some(s)) => {
                let end = root(at(k - 1), x);
                if best.is_none_or(|(a, b)| end - s > b - a) {
                    best = Some((s, end));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if best.is_none_or(|(a, b)| HI - s > b - a) {
            best = Some((s, HI));
        }
    }
    best.filter(|(a, b)| b > a).map(|(a, b)| {
        let margin = 0.05 * (b - a);
        (a + margin, b - margin)
    })
}

fn sds_cylinder(p: &Params) -> Result<GeometryEntry> {
    let (m, lambda, mu, a) = (p.get("m"), p.get("lambda"), p.get("mu"), p.get("a"));
    let (lo, hi) = sds_interval(m, lambda, mu, a).ok_or_else(|| Error::ParamOutOfRange {
        name: "m, lambda, mu, a".into(),
        value: m,
        reason: "F(ψ) > 0 nowhere on [0.1, 4]".into(),
    })?;
    let coords = [Coordinate::new("psi", lo, hi), Coordinate::periodic("tau", 0.0, TWO_PI)];
    let profile = if a == 0.0 {
        "(1 - (m-1)*lambda/((m+1)*mu)*psi^2)"
    } else {
        "(1 - a^(m-1)/psi^(m-1) - (m-1)*lambda/((m+1)*mu)*psi^2)"
    };
    let mut entry = SpecText::new(
        "sds_cylinder",
        &[("m", m), ("lambda", lambda), ("mu", mu), ("a", a)],
        Signature::Riemannian,
        &coords,
    )
    .field(&format!("g psi psi = 1/{profile}"))
    .field(&format!("g tau tau = {profile}"))
    .field("X psi = -m/psi")
    .field("f = -m*log(psi)")
    .expect(&["lambda = (m-1)*lambda/mu", "m = m", "mu = m-1"])
    .build()?;
    entry.notes.push(format!(
        "nominal μ = {mu}; measured constant expected to be μ_eff = m − 1 = {}, a factor (m−1)/μ = {} of the nominal value",
        m - 1.0,
        (m - 1.0) / mu
    ));
    Ok(entry)
}

fn maxwell_sphere(p: &Params) -> Result<GeometryEntry> {
    let (n, c, lambda) = (p.usize("n"), p.get("c"), p.get("lambda"));
    let denom = lambda + 2.0 * c * c / n as f64;
    if denom <= 0.0 {
        return Err(Error::ParamOutOfRange {
            name: "lambda".into(),
            value: lambda,
            reason: format!("λ + 2c²/n = {denom} must be positive"),
        });
    }
    let coords = sphere_coords(n);
    let s = SpecText::new(
        "maxwell_sphere",
        &[("n", n as f64), ("c", c), ("lambda", lambda)],
        Signature::Riemannian,
        &coords,
    );
    let s = sphere_fields(s, &coords, "(n-1)/(lambda+2*c^2/n)");
    let mut entry = sphere_quadrature(
        s.expect(&["lambda = lambda", "m = 2", "Y = lambda - (n-2)*c^2/n - c^2"]).build()?,
    );
    let y = entry.expected.y.expect("declared");
    let big = n + 2;
    let mut f = vec![num(0.0); big * big];
    f[big] = num(c);
    f[1] = neg(num(c));
    entry.matter = Some(matter_data(&entry, num(y), f)?);
    Ok(entry)
}

fn maxwell_circle_sigma(p: &Params) -> Result<GeometryEntry> {
    let k = p.get("k");
    let coords = [
        Coordinate::periodic("phi", 0.0, TWO_PI),
        Coordinate::new("x", -0.5, 0.5),
        Coordinate::new("y", -0.5, 0.5),
    ];
    let conformal = "1/(1 - (1-2*k^2)*(x^2+y^2)/2)^2";
    let mut entry = SpecText::new("maxwell_circle_sigma", &[("k", k)], Signature::Riemannian, &coords)
        .field("g phi phi = 1+k^2")
        .field(&format!("g x x = {conformal}"))
        .field(&format!("g y y = {conformal}"))
        .field("X phi = 2*(1+k^2)")
        .expect(&["lambda = -2", "m = 2", "Y = 0"])
        .build()?;
    // Spacetime coordinates (v, r, phi, x, y): F_xy = √3 k Ω².
    let omega2 = parse_in(
        "1/(1 - (1-2*k^2)*(x^2+y^2)/2)^2",
        &["v", "r", "phi", "x", "y"],
        &["k"],
    )?
    .bind(&|name: &str| (name == "k").then_some(k))
    .map_err(|name| Error::Config(format!("unbound `{name}`")))?;
    let fxy = mul(num(3f64.sqrt() * k), omega2);
    let mut f = vec![num(0.0); 25];
    f[3 * 5 + 4] = fxy.clone();
    f[4 * 5 + 3] = neg(fxy);
    entry.matter = Some(matter_data(&entry, num(0.0), f)?);
    Ok(entry)
}

fn matter_data(entry: &GeometryEntry, y: Expr, maxwell: Vec<Expr>) -> Result<MatterData> {
    let chart = spacetime_chart(&entry.chart)?;
    let g = entry.metric.exprs().expect("closed-form metric").to_vec();
    let x = entry.x_or_zero();
    let x = x.exprs().expect("closed-form one-form").to_vec();
    let spacetime = TensorField::symmetric(chart.clone(), assemble_exprs(&g, &x, &y))?;
    let maxwell = TensorField::two_form(chart, maxwell)?;
    Ok(MatterData { spacetime, maxwell })
}

fn minkowski(p: &Params) -> Result<GeometryEntry> {
    let n = p.usize("n");
    let mut coords = vec![Coordinate::new("t", -1.0, 1.0)];
    coords.extend((1..n).map(|i| Coordinate::new(&format!("x{i}"), -1.0, 1.0)));
    let mut s = SpecText::new("minkowski", &[("n", n as f64)], Signature::Lorentzian, &coords)
        .field("g t t = -1");
    for i in 1..n {
        s = s.field(&format!("g x{i} x{i} = 1"));
    }
    s.expect(&["Lambda = 0"]).build()
}
