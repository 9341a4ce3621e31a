use std::sync::Arc;

use proptest::prelude::*;
use qe_core::catalog::get_with;
use qe_core::chart::{Chart, Coordinate, Signature};
use qe_core::expr::{parse_in, Expr, Func};
use qe_core::field::{Backend, TensorField};
use qe_core::matter::{p_trace_defect, MatterProblem};
use qe_core::quasi_einstein::{mu_at, qe_residual, GradientData, QEProblem};
use qe_core::report::{Sampling, Stats, Status, SuiteReport, VerificationReport};
use qe_core::specfile::parse_spec_text;
use qe_core::suite::{run_suite, Suite, SuiteConfig};
use qe_core::tensor::{christoffel, exterior_derivative};

const COORDS: [&str; 3] = ["x", "y", "z"];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..2000).prop_map(|v| Expr::Num(v as f64 / 8.0)),
        (0usize..3).prop_map(Expr::Coord),
        Just(Expr::Param("k".into())),
    ]
}

fn expr_tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 40, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |a| Expr::Neg(b(a))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Add(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Sub(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Mul(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Div(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Expr::Pow(b(x), b(y))),
            (0usize..Func::ALL.len(), inner).prop_map(move |(i, a)| Expr::Call(Func::ALL[i], b(a))),
        ]
    })
}

fn chart3() -> Arc<Chart> {
    let coords = COORDS.iter().map(|c| Coordinate::new(c, -1.0, 1.0)).collect();
    Arc::new(Chart::new(coords, Signature::Riemannian).unwrap())
}

fn parse3(text: &str) -> Expr {
    parse_in(text, &COORDS, &[]).unwrap()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.8f64..0.8, 3)
}

/// Exit code derived from the rows alone.
fn contract(rows: &[VerificationReport]) -> i32 {
    let gating = |r: &&VerificationReport| !r.informational && r.status != Status::Pass;
    if rows.iter().filter(gating).any(|r| r.status == Status::Error) {
        2
    } else if rows.iter().any(|r| gating(&r)) {
        1
    } else {
        0
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expression_display_parses_back_to_the_same_tree(e in expr_tree()) {
        let names: Vec<String> = COORDS.iter().map(|s| s.to_string()).collect();
        let text = e.display(&names).to_string();
        let back = parse_in(&text, &COORDS, &["k"]).unwrap();
        prop_assert_eq!(back, e, "{}", text);
    }

    #[test]
    fn catalog_specs_round_trip(
        m in 0.1f64..6.0,
        n in 2u32..6,
        ell in 0.2f64..3.0,
        k in -1.5f64..1.5,
        a in 0.0f64..0.15,
    ) {
        let entries = [
            get_with("lim_product", &[("m", m)]).unwrap(),
            get_with("round_sphere", &[("n", n as f64), ("ell", ell)]).unwrap(),
            get_with("maxwell_circle_sigma", &[("k", k)]).unwrap(),
            get_with("sds_cylinder", &[("m", 2.0), ("lambda", 1.0), ("mu", 1.0), ("a", a)]).unwrap(),
        ];
        for e in entries {
            let again = parse_spec_text(&e.spec.emit()).unwrap();
            prop_assert_eq!(&again, &e.spec);
            let rebuilt = again.instantiate(&[]).unwrap();
            let p = e.chart.center();
            prop_assert_eq!(rebuilt.metric.values(&p).unwrap(), e.metric.values(&p).unwrap());
        }
    }

    #[test]
    fn exterior_derivative_of_a_gradient_vanishes(
        c in prop::collection::vec(-2.0f64..2.0, 4),
        p in point(),
    ) {
        let f = parse3(&format!(
            "({})*sin({}*x + y) + ({})*x^2*z + ({})*exp(0.3*y*z) + ({})*cosh(x - z)",
            c[0], c[1], c[2], c[3], c[1] * c[2]
        ));
        let chart = chart3();
        let df: Vec<Expr> = (0..3).map(|i| f.diff(i)).collect();
        let x = TensorField::covector(chart, df).unwrap();
        let d = exterior_derivative(&x, &p).unwrap();
        prop_assert!(d.sup_norm() < 1e-12, "analytic |ddf| = {}", d.sup_norm());
        let d = exterior_derivative(&x.with_backend(Backend::FiniteDifference { h: 1e-4 }), &p).unwrap();
        prop_assert!(d.sup_norm() < 1e-6, "fd |ddf| = {}", d.sup_norm());
    }

    #[test]
    fn christoffel_symbols_are_symmetric_in_lower_indices(
        c in prop::collection::vec(-0.2f64..0.2, 4),
        p in point(),
        fd in any::<bool>(),
    ) {
        let diag = [
            format!("1 + ({})*sin(x + y)^2", c[0]),
            format!("2 + ({})*cos(y*z)", c[1]),
            format!("1.5 + ({})*x*y*z", c[2]),
        ];
        let off = format!("({})*sin(z)", c[3]);
        let mut comps = vec![parse3("0"); 9];
        for i in 0..3 {
            comps[i * 3 + i] = parse3(&diag[i]);
        }
        comps[1] = parse3(&off);
        comps[3] = parse3(&off);
        let mut g = TensorField::symmetric(chart3(), comps).unwrap();
        if fd {
            g = g.with_backend(Backend::FiniteDifference { h: 1e-4 });
        }
        let gamma = christoffel(&g, &p).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let a = gamma.get(&[k, i, j]);
                    let b = gamma.get(&[k, j, i]);
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "Γ^{k}_{i}{j}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn characteristic_constant_scales_under_potential_shift(
        shift in -2.0f64..2.0,
        a in 0.0f64..0.15,
        t in 0.1f64..0.9,
    ) {
        let e = get_with("sds_cylinder", &[("m", 2.0), ("lambda", 1.0), ("mu", 1.0), ("a", a)]).unwrap();
        let prob = QEProblem::from_entry(&e).unwrap();
        let names = e.chart.names();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let shifted = parse_in(&format!("-2*log(psi) + ({shift})"), &refs, &[]).unwrap();
        let shifted = TensorField::scalar(e.chart.clone(), shifted).unwrap();
        let (lo, hi) = (e.chart.coords()[0].lo, e.chart.coords()[0].hi);
        let mut p = e.chart.center();
        p[0] = lo + t * (hi - lo);
        let mu = mu_at(&prob, &GradientData::new(e.f.clone().unwrap(), None), &p).unwrap();
        let mu_shifted = mu_at(&prob, &GradientData::new(shifted, None), &p).unwrap();
        let want = mu * (-2.0 * shift / 2.0).exp();
        prop_assert!((mu_shifted - want).abs() < 1e-9 * (1.0 + want.abs()), "{mu_shifted} vs {want}");
    }

    #[test]
    fn stress_trace_matches_null_component(
        k in -1.2f64..1.2,
        c in 0.2f64..2.0,
        lambda in 0.5f64..2.0,
        n in 2u32..4,
    ) {
        let circle = get_with("maxwell_circle_sigma", &[("k", k)]).unwrap();
        let sphere = get_with("maxwell_sphere", &[("n", n as f64), ("c", c), ("lambda", lambda)]).unwrap();
        for e in [circle, sphere] {
            let prob = MatterProblem::from_entry(&e).unwrap();
            let defect = p_trace_defect(&prob, &e.chart.center()).unwrap();
            prop_assert!(defect < 1e-9, "{}: |tr P + 2T₊₋| = {defect}", e.name);
        }
    }

    #[test]
    fn report_passes_exactly_within_tolerance(max in 0.0f64..1.0, tol in 0.0f64..1.0) {
        let e = get_with("lim_product", &[]).unwrap();
        let grid = Sampling::with_n(8).grid(&[&e.metric]);
        let stats = Stats::single(max, e.chart.center());
        let r = VerificationReport::from_stats("probe", &e.geometry_ref(), &grid, Backend::Analytic, stats, tol, "probe");
        prop_assert_eq!(r.status == Status::Pass, max <= tol);
    }

    #[test]
    fn exit_code_follows_gating_rows(rows in prop::collection::vec((0u8..3, any::<bool>()), 0..12)) {
        let e = get_with("lim_product", &[]).unwrap();
        let grid = Sampling::with_n(8).grid(&[&e.metric]);
        let reports: Vec<VerificationReport> = rows
            .iter()
            .map(|&(s, info)| {
                let mut r = VerificationReport::from_stats(
                    "probe", &e.geometry_ref(), &grid, Backend::Analytic, Stats::single(0.0, vec![]), 1.0, "probe",
                );
                r.status = [Status::Pass, Status::Fail, Status::Error][s as usize];
                r.informational = info;
                r
            })
            .collect();
        let want = contract(&reports);
        prop_assert_eq!(SuiteReport::new("probe", reports).exit_code(), want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn suite_exit_codes_follow_rows_over_configs(
        suite in prop::sample::select(vec![Suite::Lemma21, Suite::Gradient, Suite::VacuumStatic]),
        grid in 0usize..13,
        tol in prop::option::of(prop::sample::select(vec![1e-20, 1e-9, 1e-3])),
        fd in any::<bool>(),
    ) {
        let mut config = SuiteConfig::new(suite);
        config.grid = grid;
        config.tolerance = tol;
        if fd {
            config.backend = Backend::FiniteDifference { h: 1e-3 };
        }
        match run_suite(&config) {
            Err(_) => prop_assert!(grid < 8, "valid config rejected"),
            Ok(report) => {
                prop_assert!(grid >= 8);
                prop_assert_eq!(report.exit_code(), contract(&report.reports));
                if tol == Some(1e-20) {
                    prop_assert!(report.exit_code() >= 1);
                }
            }
        }
    }

    #[test]
    fn residual_argmax_lies_on_the_grid(n in 8usize..16, m in 0.5f64..4.0) {
        let e = get_with("lim_product", &[("m", m)]).unwrap();
        let prob = QEProblem::from_entry(&e).unwrap();
        let sampling = Sampling { collapse_ignorable: false, ..Sampling::with_n(n) };
        let grid = sampling.grid(&[&e.metric]);
        let rows = qe_residual(&prob, &sampling);
        let r = &rows[0];
        prop_assert_eq!(&r.grid, &grid.shape());
        let argmax = r.argmax.clone().unwrap();
        for (x, axis) in argmax.iter().zip(grid.axes()) {
            prop_assert!(axis.contains(x), "{x} not on axis");
        }
        prop_assert!(r.mean.unwrap() <= r.max.unwrap());
    }
}
