//! Named verification suites over the catalog and user geometry files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::catalog::{self, GeometryEntry};
use crate::error::{Error, Result};
use crate::expr::{num, parse_in};
use crate::field::{Backend, TensorField};
use crate::matter::{matter_lemma_check, matter_qe_residual, matter_structure, maxwell_stress_field, reduction_check, MatterProblem};
use crate::nhg::{
    assemble_nhg, einstein_residual, general_nhg_residuals, near_horizon_limit, LorentzianMetricFamily, NHGBundle,
    ANCHOR_LIMIT,
};
use crate::quasi_einstein::{
    average_norm_identity, bochner_check, characteristic_constant, lemma21_check, qe_residual, rigidity_invariants,
    GradientData, QEProblem, ANCHOR_QE,
};
use crate::report::{Sampling, SuiteReport, VerificationReport};
use crate::chart::Signature;
use crate::yamabe::{bound_check, decomposition_check, integral_identity, trial_functions, YamabeEval, QUADRATURE_TOLERANCE};

/// Default `ε` sequence for scaling limits.
pub const DEFAULT_EPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

/// Smallest admissible grid density per axis.
pub const MIN_GRID: usize = 8;

/// Grid density cap for checks on assembled and Lorentzian spacetimes.
pub const SPACETIME_GRID: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    VacuumStatic,
    Lemma21,
    Rigidity,
    Gradient,
    NhgLimit,
    Einstein5d,
    Matter,
    Yamabe,
    All,
}

impl Suite {
    /// Registry order; `all` runs the others in this order.
    pub const ALL: [Suite; 9] = [
        Suite::VacuumStatic,
        Suite::Lemma21,
        Suite::Rigidity,
        Suite::Gradient,
        Suite::NhgLimit,
        Suite::Einstein5d,
        Suite::Matter,
        Suite::Yamabe,
        Suite::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::VacuumStatic => "vacuum-static",
            Suite::Lemma21 => "lemma21",
            Suite::Rigidity => "rigidity",
            Suite::Gradient => "gradient",
            Suite::NhgLimit => "nhg-limit",
            Suite::Einstein5d => "einstein-5d",
            Suite::Matter => "matter",
            Suite::Yamabe => "yamabe",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

/// Everything that determines a suite run.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub suite: Suite,
    /// Grid points per active axis; also quadrature nodes per axis.
    pub grid: usize,
    pub tolerance: Option<f64>,
    pub backend: Backend,
    pub format: ReportFormat,
    /// Single catalog geometry to run instead of the suite's defaults.
    pub geometry: Option<String>,
    pub params: Vec<(String, f64)>,
    /// Geometry file to run instead of the suite's defaults.
    pub spec: Option<PathBuf>,
    pub collapse_ignorable: bool,
}

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        SuiteConfig {
            suite,
            grid: 24,
            tolerance: None,
            backend: Backend::Analytic,
            format: ReportFormat::Json,
            geometry: None,
            params: Vec::new(),
            spec: None,
            collapse_ignorable: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid < MIN_GRID {
            return Err(Error::Config(format!(
                "grid density {} is below the minimum {MIN_GRID}",
                self.grid
            )));
        }
        if let Some(t) = self.tolerance {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("tolerance {t} must be positive")));
            }
        }
        if let Some(h) = self.backend.step() {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Config(format!("step h = {h} must be positive")));
            }
        }
        if self.geometry.is_some() && self.spec.is_some() {
            return Err(Error::Config("--geometry and --spec are exclusive".into()));
        }
        if !self.params.is_empty() && self.geometry.is_none() && self.spec.is_none() {
            return Err(Error::Config("parameters need --geometry or --spec".into()));
        }
        Ok(())
    }

    pub fn sampling(&self) -> Sampling {
        Sampling {
            n: self.grid,
            tolerance: self.tolerance,
            collapse_ignorable: self.collapse_ignorable,
        }
    }

    /// Sampling for spacetime checks, capped at [`SPACETIME_GRID`].
    pub fn spacetime_sampling(&self) -> Sampling {
        Sampling {
            n: self.grid.min(SPACETIME_GRID),
            ..self.sampling()
        }
    }

    fn quadrature_tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(QUADRATURE_TOLERANCE)
    }
}

type Job<'a> = Box<dyn Fn() -> Vec<VerificationReport> + Send + Sync + 'a>;

/// Runs the configured suite. Configuration, geometry and file errors are
/// returned; failures inside a check become error rows.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    config.validate()?;
    let jobs = match custom_entry(config)? {
        Some(entry) => {
            let suites: Vec<Suite> = match config.suite {
                Suite::All => Suite::ALL[..8].to_vec(),
                s => vec![s],
            };
            suites.into_iter().map(|s| entry_job(s, entry.clone(), config)).collect()
        }
        None => default_jobs(config.suite, config)?,
    };
    let reports: Vec<VerificationReport> = jobs.par_iter().map(|job| job()).collect::<Vec<_>>().concat();
    Ok(SuiteReport::new(config.suite.name(), reports))
}

fn custom_entry(config: &SuiteConfig) -> Result<Option<GeometryEntry>> {
    let entry = if let Some(path) = &config.spec {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Some(crate::specfile::parse_spec_text(&text)?.instantiate(&config.params)?)
    } else if let Some(name) = &config.geometry {
        Some(catalog::get(name, &config.params)?)
    } else {
        None
    };
    Ok(entry.map(|e| e.with_backend(config.backend)))
}

fn catalog_entry(name: &str, params: &[(&str, f64)], backend: Backend) -> Result<GeometryEntry> {
    Ok(catalog::get_with(name, params)?.with_backend(backend))
}

const LIM_MS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const SDS_TUPLES: [[f64; 4]; 4] = [[2.0, 1.0, 1.0, 0.0], [2.0, 1.0, 1.0, 0.1], [0.5, 1.0, 1.0, 0.0], [3.0, -1.0, -1.0, 0.1]];
const CIRCLE_KS: [f64; 3] = [0.5, 1.0, 0.8];

fn sds(t: [f64; 4]) -> Vec<(&'static str, f64)> {
    vec![("m", t[0]), ("lambda", t[1]), ("mu", t[2]), ("a", t[3])]
}

/// Catalog targets of each suite in registry order.
fn default_targets(suite: Suite) -> Vec<(&'static str, Vec<(&'static str, f64)>)> {
    let lims = || LIM_MS.iter().map(|m| ("lim_product", vec![("m", *m)])).collect::<Vec<_>>();
    let sdss = || SDS_TUPLES.iter().map(|t| ("sds_cylinder", sds(*t))).collect::<Vec<_>>();
    match suite {
        Suite::VacuumStatic => {
            let mut t = lims();
            t.push(("round_sphere", vec![("n", 2.0)]));
            t.push(("round_sphere", vec![("n", 3.0)]));
            t.push(("flat_torus", vec![("n", 3.0)]));
            t.push(("hyperbolic_surface", vec![]));
            t.extend(sdss());
            t
        }
        Suite::Lemma21 => vec![
            ("lim_product", vec![("m", 2.0)]),
            ("sds_cylinder", sds(SDS_TUPLES[0])),
            ("sds_cylinder", sds(SDS_TUPLES[1])),
        ],
        Suite::Rigidity => {
            let mut t = lims();
            t.push(("round_sphere", vec![("n", 3.0)]));
            t
        }
        Suite::Gradient => sdss(),
        Suite::NhgLimit => vec![
            ("xbtz_product", vec![("a", 0.25)]),
            ("lim_product", vec![("m", 2.0)]),
            ("round_sphere", vec![("n", 2.0)]),
        ],
        Suite::Einstein5d => vec![
            ("xbtz_product", vec![("a", 0.25)]),
            ("xbtz_nhg", vec![("a", 0.25)]),
            ("lim_product", vec![("m", 2.0)]),
            ("minkowski", vec![("n", 4.0)]),
        ],
        Suite::Matter => {
            let mut t = vec![("maxwell_sphere", vec![("n", 2.0), ("c", 1.0), ("lambda", 1.0)])];
            t.extend(CIRCLE_KS.iter().map(|k| ("maxwell_circle_sigma", vec![("k", *k)])));
            t
        }
        Suite::Yamabe => vec![
            ("lim_product", vec![("m", 2.0)]),
            ("round_sphere", vec![("n", 3.0)]),
            ("flat_torus", vec![("n", 3.0)]),
        ],
        Suite::All => Vec::new(),
    }
}

fn default_jobs<'a>(suite: Suite, config: &'a SuiteConfig) -> Result<Vec<Job<'a>>> {
    if suite == Suite::All {
        let mut jobs = Vec::new();
        for s in &Suite::ALL[..8] {
            jobs.extend(default_jobs(*s, config)?);
        }
        return Ok(jobs);
    }
    let mut jobs = Vec::new();
    for (name, params) in default_targets(suite) {
        let entry = catalog_entry(name, &params, config.backend)?;
        jobs.push(entry_job(suite, entry, config));
    }
    if suite == Suite::Yamabe {
        jobs.push(Box::new(move || sphere_bound_rows(config)));
    }
    Ok(jobs)
}

fn entry_job<'a>(suite: Suite, entry: GeometryEntry, config: &'a SuiteConfig) -> Job<'a> {
    Box::new(move || suite_rows(suite, &entry, config))
}

/// A single row recording that `entry` cannot be run in this suite.
fn error_row(check: &str, anchor: &str, entry: &GeometryEntry, config: &SuiteConfig, err: &Error) -> Vec<VerificationReport> {
    let tol = config.sampling().tolerance(config.backend);
    vec![VerificationReport::error(check, &entry.geometry_ref(), config.backend, tol, anchor, err)]
}

fn problem(entry: &GeometryEntry) -> Result<QEProblem> {
    QEProblem::from_entry(entry)
}

fn suite_rows(suite: Suite, entry: &GeometryEntry, config: &SuiteConfig) -> Vec<VerificationReport> {
    let sampling = config.sampling();
    let qe = |f: &dyn Fn(&QEProblem) -> Vec<VerificationReport>| match problem(entry) {
        Ok(p) => f(&p),
        Err(e) => error_row("qe_residual", ANCHOR_QE, entry, config, &e),
    };
    match suite {
        Suite::VacuumStatic => qe(&|p| qe_residual(p, &sampling)),
        Suite::Lemma21 => qe(&|p| lemma21_check(p, &sampling)),
        Suite::Rigidity => qe(&|p| {
            let mut rows = rigidity_invariants(p, &sampling);
            let rule = entry.quadrature_rule(config.grid).ok();
            rows.extend(average_norm_identity(p, rule.as_ref(), &sampling));
            if config.backend == Backend::Analytic {
                rows.extend(bochner_check(p, &sampling));
            }
            rows
        }),
        Suite::Gradient => qe(&|p| gradient_rows(p, entry, &sampling)),
        Suite::NhgLimit => nhg_rows(entry, config),
        Suite::Einstein5d => einstein_rows(entry, config),
        Suite::Matter => matter_rows(entry, config),
        Suite::Yamabe => qe(&|p| yamabe_rows(p, entry, config)),
        Suite::All => Suite::ALL[..8].iter().flat_map(|s| suite_rows(*s, entry, config)).collect(),
    }
}

fn gradient_rows(prob: &QEProblem, entry: &GeometryEntry, sampling: &Sampling) -> Vec<VerificationReport> {
    let gradient = match &entry.f {
        Some(f) => GradientData::new(f.clone(), entry.expected.mu),
        None => match GradientData::reconstruct(prob) {
            Ok(g) => GradientData { mu: entry.expected.mu, ..g },
            Err(e) => {
                return vec![VerificationReport::error(
                    "mu_constancy",
                    &prob.geometry,
                    prob.backend(),
                    sampling.tolerance(prob.backend()),
                    crate::quasi_einstein::ANCHOR_MU,
                    &e,
                )]
            }
        },
    };
    let notes: Vec<&String> = entry.notes.iter().filter(|n| n.starts_with("nominal μ")).collect();
    characteristic_constant(prob, &gradient, sampling)
        .into_iter()
        .map(|r| notes.iter().fold(r, |r, n| r.with_note(n)))
        .collect()
}

fn nhg_rows(entry: &GeometryEntry, config: &SuiteConfig) -> Vec<VerificationReport> {
    if entry.chart.signature() == Signature::Lorentzian {
        return limit_rows(entry, &DEFAULT_EPS, config.backend, &config.spacetime_sampling());
    }
    let sampling = config.sampling();
    let bundle = NHGBundle::from_entry(entry).or_else(|e| {
        // Static data with X = 0 carry the constant Y = λ.
        match (entry.x.is_none(), entry.expected.lambda) {
            (true, Some(l)) => NHGBundle::new(
                QEProblem::from_entry(entry)?,
                TensorField::scalar(entry.chart.clone(), num(l))?.with_backend(entry.backend()),
            ),
            _ => Err(e),
        }
    });
    match bundle {
        Ok(b) => general_nhg_residuals(&b, &sampling),
        Err(e) => error_row("nhg_lambda_constraint", crate::nhg::ANCHOR_GENERAL, entry, config, &e),
    }
}

/// Scaling family of a Lorentzian entry with its catalog limit, when known.
fn limit_reference(entry: &GeometryEntry) -> Result<Option<TensorField>> {
    if entry.name == "xbtz_product" {
        let params: Vec<(&str, f64)> = entry.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let nhg = catalog_entry("xbtz_nhg", &params, entry.backend())?;
        return Ok(Some(nhg.metric));
    }
    Ok(None)
}

fn limit_rows(entry: &GeometryEntry, eps: &[f64], backend: Backend, sampling: &Sampling) -> Vec<VerificationReport> {
    let geometry = entry.geometry_ref();
    let run = || -> Result<Vec<VerificationReport>> {
        let family = LorentzianMetricFamily::scaling(&entry.name, &entry.metric)?;
        let reference = limit_reference(entry)?;
        Ok(near_horizon_limit(&family, eps, reference.as_ref(), &geometry, sampling)?.reports)
    };
    run().unwrap_or_else(|e| {
        vec![VerificationReport::error(
            "nhg_limit_order",
            &geometry,
            backend,
            sampling.tolerance(backend),
            ANCHOR_LIMIT,
            &e,
        )]
    })
}

/// Limit rows for the named catalog family, for the `limit` verb.
pub fn run_limit(
    family: &str,
    params: &[(String, f64)],
    eps: &[f64],
    backend: Backend,
    sampling: &Sampling,
) -> Result<SuiteReport> {
    let entry = catalog::get(family, params)?.with_backend(backend);
    if entry.chart.signature() != Signature::Lorentzian {
        return Err(Error::Precondition(format!("`{family}` is not a Lorentzian family")));
    }
    let family = LorentzianMetricFamily::scaling(&entry.name, &entry.metric)?;
    let reference = limit_reference(&entry)?;
    let outcome = near_horizon_limit(&family, eps, reference.as_ref(), &entry.geometry_ref(), sampling)?;
    Ok(SuiteReport::new("limit", outcome.reports))
}

fn einstein_rows(entry: &GeometryEntry, config: &SuiteConfig) -> Vec<VerificationReport> {
    let sampling = config.spacetime_sampling();
    let geometry = entry.geometry_ref();
    let run = || -> Result<VerificationReport> {
        if entry.chart.signature() == Signature::Lorentzian {
            let cosmological = entry.expected.cosmological.ok_or_else(|| {
                Error::Precondition(format!("`{}` declares no cosmological constant", entry.name))
            })?;
            return Ok(einstein_residual(&entry.metric, cosmological, None, &geometry, &sampling));
        }
        if let Some(m) = &entry.matter {
            let t = maxwell_stress_field(&m.maxwell, &m.spacetime)?;
            let lambda = entry.expected.lambda.ok_or_else(|| Error::Precondition("no λ declared".into()))?;
            let cosmological = entry.dim() as f64 * lambda / 2.0;
            return Ok(einstein_residual(&m.spacetime, cosmological, Some(&t), &geometry, &sampling));
        }
        let bundle = NHGBundle::from_entry(entry)?;
        let metric = assemble_nhg(&bundle)?;
        Ok(einstein_residual(&metric, bundle.cosmological, None, &geometry, &sampling)
            .with_note("assembled near-horizon spacetime"))
    };
    match run() {
        Ok(r) => vec![r],
        Err(e) => error_row("einstein_residual", crate::nhg::ANCHOR_EINSTEIN, entry, config, &e),
    }
}

fn matter_rows(entry: &GeometryEntry, config: &SuiteConfig) -> Vec<VerificationReport> {
    let sampling = config.sampling();
    match MatterProblem::from_entry(entry) {
        Ok(p) => {
            let mut rows = matter_qe_residual(&p, &sampling);
            rows.extend(matter_structure(&p, &sampling));
            rows.extend(matter_lemma_check(&p, &sampling));
            rows.extend(reduction_check(&p, &sampling));
            if entry.matter.is_some() {
                rows.extend(einstein_rows(entry, config));
            }
            rows
        }
        Err(e) => error_row("matter_qe_residual", crate::matter::ANCHOR_MATTER_QE, entry, config, &e),
    }
}

fn yamabe_rows(prob: &QEProblem, entry: &GeometryEntry, config: &SuiteConfig) -> Vec<VerificationReport> {
    let sampling = config.sampling();
    let trials = match trial_functions(&entry.chart, 5) {
        Ok(t) => t,
        Err(e) => return error_row("yamabe_decomposition", crate::yamabe::ANCHOR_DECOMPOSITION, entry, config, &e),
    };
    let mut rows = Vec::new();
    for (phi, k) in trials {
        match YamabeEval::new(prob.clone(), phi.with_backend(config.backend), k) {
            Ok(eval) => {
                rows.extend(decomposition_check(&eval, &sampling));
                if let Ok(rule) = entry.quadrature_rule(config.grid) {
                    rows.extend(integral_identity(&analytic(&eval), &rule, config.quadrature_tolerance()));
                }
            }
            Err(e) => {
                rows.extend(error_row("yamabe_decomposition", crate::yamabe::ANCHOR_DECOMPOSITION, entry, config, &e));
                break;
            }
        }
    }
    rows
}

/// Quadrature nodes can sit closer to a coordinate pole than a stencil
/// reaches, so quadrature rows always use the analytic backend.
fn analytic(eval: &YamabeEval) -> YamabeEval {
    YamabeEval {
        problem: eval.problem.with_backend(Backend::Analytic),
        phi: eval.phi.with_backend(Backend::Analytic),
        k: eval.k,
    }
}

/// Perturbations of `φ ≡ 1` on the unit three-sphere, smooth across the
/// coordinate poles.
pub const SPHERE_PERTURBATIONS: [&str; 3] = [
    "1 + 0.3*cos(theta1)",
    "1 + 0.25*sin(theta1)*cos(theta2)",
    "1 + 0.2*sin(theta1)*sin(theta2)*cos(phi) + 0.1*cos(theta1)^2",
];

/// Bound rows, on the analytic backend, on the unit three-sphere with `X = 0`, `λ = 2`, `m = 2`,
/// `k² = 2`: `φ ≡ 1` first, then the perturbations.
fn sphere_bound_rows(config: &SuiteConfig) -> Vec<VerificationReport> {
    let run = || -> Result<Vec<VerificationReport>> {
        let entry = catalog_entry("round_sphere", &[("n", 3.0), ("ell", 1.0)], Backend::Analytic)?;
        let rule = entry.quadrature_rule(config.grid)?;
        let prob = QEProblem::from_entry(&entry)?;
        let names = entry.chart.names();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut rows = Vec::new();
        for text in std::iter::once("1").chain(SPHERE_PERTURBATIONS) {
            let phi = TensorField::scalar(entry.chart.clone(), parse_in(text, &refs, &[])?)?;
            let eval = YamabeEval::new(prob.clone(), phi, 2f64.sqrt())?;
            rows.push(bound_check(&eval, &rule, config.quadrature_tolerance()).with_note(&format!("φ = {text}")));
        }
        Ok(rows)
    };
    run().unwrap_or_else(|e| {
        vec![VerificationReport::error(
            "yamabe_bound",
            &crate::report::GeometryRef::new("round_sphere", &[("n", 3.0), ("ell", 1.0)]),
            Backend::Analytic,
            config.quadrature_tolerance(),
            crate::yamabe::ANCHOR_BOUND,
            &e,
        )]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!("nope".parse::<Suite>(), Err(Error::UnknownSuite("nope".into())));
    }

    #[test]
    fn config_validation() {
        let mut c = SuiteConfig::new(Suite::Lemma21);
        c.grid = 7;
        assert!(matches!(run_suite(&c), Err(Error::Config(_))));
        c.grid = 8;
        c.tolerance = Some(0.0);
        assert!(c.validate().is_err());
        c.tolerance = None;
        c.backend = Backend::FiniteDifference { h: -1.0 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn lemma_suite_passes() {
        let mut c = SuiteConfig::new(Suite::Lemma21);
        c.grid = 8;
        let r = run_suite(&c).unwrap();
        assert_eq!(r.exit_code(), 0, "{}", r.to_text());
        assert!(!r.reports.is_empty());
    }

    #[test]
    fn unknown_geometry_is_an_error() {
        let mut c = SuiteConfig::new(Suite::VacuumStatic);
        c.geometry = Some("nowhere".into());
        assert_eq!(run_suite(&c).unwrap_err(), Error::UnknownGeometry("nowhere".into()));
    }
}
