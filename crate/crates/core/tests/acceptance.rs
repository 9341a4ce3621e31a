//! Acceptance criteria 1–9. Each test writes one `criterion N: PASS|FAIL`
//! line to stderr (bypassing output capture) and then asserts.

use std::f64::consts::PI;
use std::io::Write;

use qe_core::catalog::{self, get_with, sds_profile, sphere_stereographic, stereographic_to_spherical, GeometryEntry};
use qe_core::expr::parse_in;
use qe_core::field::{Backend, TensorField};
use qe_core::matter::{matter_lemma_check, matter_qe_residual, matter_structure, reduction_check, MatterProblem};
use qe_core::nhg::{einstein_residual, near_horizon_limit, LorentzianMetricFamily};
use qe_core::quasi_einstein::{
    characteristic_constant, lemma21_check, loop_integrals, qe_residual, rigidity_invariants, GradientData, QEProblem,
};
use qe_core::report::{Sampling, Status, VerificationReport};
use qe_core::suite::{run_suite, Suite, SuiteConfig, SPHERE_PERTURBATIONS};
use qe_core::tensor::{contracted_bianchi, ricci, scalar_curvature};
use qe_core::yamabe::{bound_values, decomposition_check, yamabe_quotient, YamabeEval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const ANALYTIC_TOL: f64 = 1e-9;
const FD_TOL: f64 = 1e-6;
const LOOP_TOL: f64 = 1e-8;
const MU_TOL: f64 = 1e-6;
const EINSTEIN_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-4;
const ORDER_TOL: f64 = 0.2;
const QUADRATURE_TOL: f64 = 1e-6;
const CHART_TOL: f64 = 1e-6;
const VOLUME_TOL: f64 = 1e-8;
const CROSS_STEP: f64 = 1e-3;

fn verdict(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn row<'a>(rows: &'a [VerificationReport], check: &str) -> &'a VerificationReport {
    rows.iter()
        .find(|r| r.check == check)
        .unwrap_or_else(|| panic!("no `{check}` row in {rows:?}"))
}

fn max(r: &VerificationReport) -> f64 {
    r.max.unwrap_or(f64::INFINITY)
}

fn sds(m: f64, lambda: f64, mu: f64, a: f64) -> GeometryEntry {
    get_with("sds_cylinder", &[("m", m), ("lambda", lambda), ("mu", mu), ("a", a)]).unwrap()
}

fn scalar(entry: &GeometryEntry, text: &str) -> TensorField {
    let names = entry.chart.names();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    TensorField::scalar(entry.chart.clone(), parse_in(text, &refs, &[]).unwrap()).unwrap()
}

#[test]
fn criterion_1_non_exact_counter_example() {
    let mut worst = [0.0f64; 3];
    let mut ok = true;
    for m in [0.5, 1.0, 2.0, 4.0] {
        let e = get_with("lim_product", &[("m", m)]).unwrap();
        let prob = QEProblem::from_entry(&e).unwrap();
        ok &= prob.lambda == -m;
        let rows = qe_residual(&prob, &Sampling::default());
        let qe = max(row(&rows, "qe_residual"));
        let dx = max(row(&rows, "dx_norm"));
        let loops = loop_integrals(&prob.x, &e.chart.center()).unwrap();
        let (_, around) = loops.iter().find(|(axis, _)| *axis == 0).copied().unwrap();
        let loop_err = (around - 2.0 * PI * m).abs();
        worst = [worst[0].max(qe), worst[1].max(dx), worst[2].max(loop_err)];
        ok &= qe < ANALYTIC_TOL && dx < ANALYTIC_TOL && loop_err <= LOOP_TOL;
    }
    verdict(
        1,
        ok,
        &format!(
            "lim_product m∈{{0.5,1,2,4}}: max qe={:.2e} max |dX|={:.2e} max |∮X−2πm|={:.2e}",
            worst[0], worst[1], worst[2]
        ),
    );
}

#[test]
fn criterion_2_rigidity_invariants() {
    let e = get_with("lim_product", &[("m", 2.0)]).unwrap();
    let prob = QEProblem::from_entry(&e).unwrap();
    let rows = rigidity_invariants(&prob, &Sampling::default());
    let worst = rows.iter().map(max).fold(0.0, f64::max);
    let gating = rows.iter().all(|r| !r.informational);
    // Independent oracle: R of dΦ² + g_H/m is −2m at every point.
    let r = scalar_curvature(&prob.g, &[1.0, 0.2, 0.9]).unwrap();
    let oracle = (r + 4.0).abs();
    verdict(
        2,
        gating && rows.len() == 4 && worst < ANALYTIC_TOL && oracle < ANALYTIC_TOL,
        &format!("lim_product(2): max invariant={worst:.2e}, |R + 2m|={oracle:.2e}"),
    );
}

#[test]
fn criterion_3_static_redundancy_identities() {
    let mut analytic = 0.0f64;
    let mut fd = 0.0f64;
    for e in [get_with("lim_product", &[("m", 2.0)]).unwrap(), sds(2.0, 1.0, 1.0, 0.1)] {
        let prob = QEProblem::from_entry(&e).unwrap();
        for (backend, acc) in [(Backend::Analytic, &mut analytic), (Backend::FiniteDifference { h: FD_STEP }, &mut fd)] {
            let rows = lemma21_check(&prob.with_backend(backend), &Sampling::default());
            for check in ["lemma_dy_minus_yx", "lemma_scalar_identity"] {
                *acc = acc.max(max(row(&rows, check)));
            }
        }
    }
    verdict(
        3,
        analytic < ANALYTIC_TOL && fd < FD_TOL,
        &format!("lim_product(2), sds_cylinder(2,1,1,0.1): analytic={analytic:.2e} fd={fd:.2e}"),
    );
}

/// `μ` at `ψ` from the profile alone: with `√det g = 1` and `g^ψψ = F`,
/// `Δf = (F f′)′`, `|df|² = F f′²`, `e^{2f/m} = ψ^{−2}`.
fn mu_oracle(m: f64, lambda: f64, mu: f64, a: f64, psi: f64) -> f64 {
    let lambda_eff = (m - 1.0) * lambda / mu;
    let f = |s: f64| sds_profile(m, lambda, mu, a, s);
    let h = 1e-5;
    let df = (f(psi + h) - f(psi - h)) / (2.0 * h);
    let fp = -m / psi;
    let fpp = m / (psi * psi);
    let lap = df * fp + f(psi) * fpp;
    let grad2 = f(psi) * fp * fp;
    -(lap - grad2 - m * lambda_eff) * psi * psi / m
}

#[test]
fn criterion_4_characteristic_constant() {
    let mut ok = true;
    let mut details = Vec::new();
    for (m, lambda, mu, a) in [(2.0, 1.0, 1.0, 0.0), (2.0, 1.0, 1.0, 0.1), (0.5, 1.0, 1.0, 0.0), (3.0, -1.0, -1.0, 0.1)] {
        let e = sds(m, lambda, mu, a);
        let prob = QEProblem::from_entry(&e).unwrap();
        let gradient = GradientData::new(e.f.clone().unwrap(), e.expected.mu);
        let rows = characteristic_constant(&prob, &gradient, &Sampling::default());
        let spread = max(row(&rows, "mu_constancy"));
        let value = row(&rows, "mu_value");
        let measured = value.measured.unwrap();
        let expected = value.expected.unwrap();
        let psi = e.chart.center()[0];
        let oracle = mu_oracle(m, lambda, mu, a, psi);
        let agree = (measured - expected).abs() < MU_TOL && (oracle - expected).abs() < MU_TOL;
        ok &= spread < MU_TOL && agree;
        details.push(format!("({m},{lambda},{mu},{a}): μ={measured:.9} spread={spread:.1e} nominal={mu}"));
    }
    verdict(4, ok, &details.join("; "));
}

#[test]
fn criterion_5_five_dimensional_vacuum() {
    let fd = Backend::FiniteDifference { h: FD_STEP };
    let mut residuals = Vec::new();
    for name in ["xbtz_product", "xbtz_nhg"] {
        let e = get_with(name, &[("a", 0.25)]).unwrap().with_backend(fd);
        assert_eq!(e.expected.cosmological, Some(-3.0));
        let r = einstein_residual(&e.metric, -3.0, None, &e.geometry_ref(), &Sampling::with_n(12));
        residuals.push(max(&r));
    }
    let source = get_with("xbtz_product", &[("a", 0.25)]).unwrap();
    let reference = get_with("xbtz_nhg", &[("a", 0.25)]).unwrap();
    let family = LorentzianMetricFamily::scaling("xbtz_product", &source.metric).unwrap();
    let outcome = near_horizon_limit(
        &family,
        &[0.1, 0.05, 0.025, 0.0125],
        Some(&reference.metric),
        &source.geometry_ref(),
        &Sampling::with_n(12),
    )
    .unwrap();
    let order = outcome.order.unwrap_or(f64::NAN);
    let matches = row(&outcome.reports, "nhg_limit_reference").passed();
    let ok = residuals.iter().all(|r| *r < EINSTEIN_TOL) && (order - 1.0).abs() <= ORDER_TOL && matches;
    verdict(
        5,
        ok,
        &format!(
            "Einstein residual (fd h=1e-4) product={:.2e} nhg={:.2e}; limit order={order:.3}, reference match={matches}",
            residuals[0], residuals[1]
        ),
    );
}

#[test]
fn criterion_6_matter_solutions() {
    let sampling = Sampling::default();
    let mut ok = true;
    let mut worst = 0.0f64;
    let sphere = get_with("maxwell_sphere", &[("n", 2.0), ("c", 1.0), ("lambda", 1.0)]).unwrap();
    ok &= (sphere.metric.values(&sphere.chart.center()).unwrap()[0] - 0.5).abs() < 1e-15;
    let mut entries = vec![sphere];
    for k in [0.5, 1.0, 0.8] {
        entries.push(get_with("maxwell_circle_sigma", &[("k", k)]).unwrap());
    }
    let mut reductions = Vec::new();
    for e in &entries {
        let prob = MatterProblem::from_entry(e).unwrap();
        let mut rows = matter_qe_residual(&prob, &sampling);
        rows.extend(matter_structure(&prob, &sampling));
        rows.extend(matter_lemma_check(&prob, &sampling));
        for check in [
            "matter_qe_residual",
            "matter_beta",
            "matter_lemma_dy_minus_yx",
            "matter_lemma_scalar_identity",
        ] {
            let v = max(row(&rows, check));
            worst = worst.max(v);
            ok &= v < ANALYTIC_TOL;
        }
        let red = reduction_check(&prob, &sampling);
        reductions.push((e.name.clone(), red));
    }
    let sphere_reduces = reductions[0].1.iter().all(|r| r.passed());
    let circles_rejected = reductions[1..].iter().all(|(_, rows)| {
        rows.len() == 1
            && rows[0].check == "reduction_residual"
            && rows[0].status == Status::HypothesesFailed
            && rows[0].note.contains("tracefree part of T nonzero")
    });
    ok &= sphere_reduces && circles_rejected;
    verdict(
        6,
        ok,
        &format!(
            "max matter residual={worst:.2e}; reduction on sphere={sphere_reduces}, circle_sigma rejected by precondition={circles_rejected}"
        ),
    );
}

fn random_phi(entry: &GeometryEntry, rng: &mut ChaCha8Rng) -> String {
    let mut text = format!("{:?}", rng.random_range(2.0..3.0));
    for c in entry.chart.coords() {
        let amp: f64 = rng.random_range(-0.5..0.5);
        let freq: f64 = rng.random_range(0.5..2.0);
        let shift: f64 = rng.random_range(0.0..PI);
        text.push_str(&format!(" + ({amp:?})*sin(({freq:?})*{} + ({shift:?}))", c.name));
    }
    text
}

#[test]
fn criterion_7_yamabe_decomposition_and_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_7a);
    let candidates = [
        ("lim_product", vec![("m", 0.5)]),
        ("lim_product", vec![("m", 1.0)]),
        ("lim_product", vec![("m", 2.0)]),
        ("lim_product", vec![("m", 4.0)]),
        ("round_sphere", vec![("n", 3.0), ("ell", 1.0)]),
        ("round_sphere", vec![("n", 4.0), ("ell", 1.5)]),
        ("flat_torus", vec![("n", 3.0)]),
    ];
    let sampling = Sampling::with_n(8);
    let mut geometries = 0;
    let mut worst = 0.0f64;
    for (name, params) in candidates {
        let e = get_with(name, &params).unwrap();
        let prob = QEProblem::from_entry(&e).unwrap();
        if !qe_residual(&prob, &sampling).iter().all(|r| r.passed()) {
            continue;
        }
        geometries += 1;
        for _ in 0..5 {
            let phi = scalar(&e, &random_phi(&e, &mut rng));
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let k = sign * rng.random_range(0.3..3.0);
            let eval = YamabeEval::new(prob.clone(), phi, k).unwrap();
            let r = decomposition_check(&eval, &sampling).remove(0);
            assert_eq!(r.status, Status::Pass, "{}", r.text_line());
            worst = worst.max(max(&r));
        }
    }

    let s3 = get_with("round_sphere", &[("n", 3.0), ("ell", 1.0)]).unwrap();
    let rule = s3.quadrature_rule(24).unwrap();
    let prob = QEProblem::from_entry(&s3).unwrap();
    assert!(prob.lambda == 2.0 && prob.m == 2.0);
    let k = 2f64.sqrt();
    let eval = YamabeEval::new(prob.clone(), scalar(&s3, "1"), k).unwrap();
    let (q, bound) = bound_values(&eval, &rule).unwrap();
    // Oracle: R = 6 and Vol(S³) = 2π² give Q(1) = 6 (2π²)^{2/3}.
    let oracle = 6.0 * (2.0 * PI * PI).powf(2.0 / 3.0);
    let q_direct = yamabe_quotient(&prob.g, &eval.phi, &rule).unwrap();
    let equality = (q - bound).abs() <= QUADRATURE_TOL && (q_direct - oracle).abs() <= QUADRATURE_TOL;
    let mut gaps = Vec::new();
    for text in SPHERE_PERTURBATIONS {
        let (q, bound) = bound_values(&eval.with_phi(scalar(&s3, text)).unwrap(), &rule).unwrap();
        gaps.push(q - bound);
    }
    let strict = gaps.iter().all(|g| *g > QUADRATURE_TOL);
    verdict(
        7,
        geometries >= 3 && worst < ANALYTIC_TOL && equality && strict,
        &format!(
            "decomposition on {geometries} geometries × 5 pairs: max={worst:.2e}; S³ φ≡1 |Q−bound|={:.2e}; perturbed gaps={:?}",
            (q - bound).abs(),
            gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()
        ),
    );
}

fn catalog_metrics() -> Vec<(String, TensorField)> {
    let mut out = Vec::new();
    for item in catalog::list() {
        let e = catalog::get(item.name, &[]).unwrap();
        out.push((e.name.clone(), e.metric.clone()));
        if let Some(m) = &e.matter {
            out.push((format!("{} spacetime", e.name), m.spacetime.clone()));
        }
    }
    out
}

#[test]
fn criterion_8_cross_backend_and_invariance() {
    let h = CROSS_STEP;
    let bound = 50.0 * h * h;
    let fd = Backend::FiniteDifference { h };
    let mut ricci_gap = 0.0f64;
    let mut bianchi = 0.0f64;
    for (_, g) in catalog_metrics() {
        let g_fd = g.with_backend(fd);
        let grid = Sampling::with_n(4).grid(&[&g_fd]);
        for k in 0..grid.len() {
            let p = grid.point(k);
            let a = ricci(&g, &p).unwrap();
            let b = ricci(&g_fd, &p).unwrap();
            let gap = a.components.iter().zip(&b.components).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            ricci_gap = ricci_gap.max(gap);
            bianchi = bianchi.max(contracted_bianchi(&g_fd, &p).unwrap().sup_norm());
        }
    }

    let stereo = sphere_stereographic(1.0).unwrap();
    let round = get_with("round_sphere", &[("n", 2.0), ("ell", 1.0)]).unwrap();
    let mut chart_gap = 0.0f64;
    for (u, w) in [(0.3, -0.2), (1.1, 0.4), (-0.7, -0.9), (0.05, 1.5)] {
        let [theta, phi] = stereographic_to_spherical(u, w);
        let r_stereo = scalar_curvature(&stereo.metric.with_backend(fd), &[u, w]).unwrap();
        let r_round = scalar_curvature(&round.metric, &[theta, phi]).unwrap();
        chart_gap = chart_gap.max((r_stereo - r_round).abs());
    }

    let s3 = get_with("round_sphere", &[("n", 3.0), ("ell", 1.0)]).unwrap();
    let t2 = get_with("flat_torus", &[("n", 2.0)]).unwrap();
    let vol_s3 = s3.quadrature_rule(24).unwrap().volume(&s3.metric).unwrap();
    let vol_t2 = t2.quadrature_rule(24).unwrap().volume(&t2.metric).unwrap();
    let vol_gap = (vol_s3 - 2.0 * PI * PI).abs().max((vol_t2 - 4.0 * PI * PI).abs());

    verdict(
        8,
        ricci_gap <= bound && bianchi <= bound && chart_gap <= CHART_TOL && vol_gap <= VOLUME_TOL,
        &format!(
            "h={h:.0e}: Ricci fd−analytic={ricci_gap:.2e} Bianchi={bianchi:.2e} (≤ {bound:.1e}); two-chart R={chart_gap:.2e}; volumes={vol_gap:.2e}"
        ),
    );
}

#[test]
fn criterion_9_deterministic_reports() {
    let config = SuiteConfig::new(Suite::All);
    let first = run_suite(&config).unwrap();
    let second = run_suite(&config).unwrap();
    let identical = first.to_json() == second.to_json();
    verdict(
        9,
        identical && first.exit_code() == 0,
        &format!(
            "verify all --report json: {} rows, byte-identical={identical}, exit={}",
            first.reports.len(),
            first.exit_code()
        ),
    );
}
