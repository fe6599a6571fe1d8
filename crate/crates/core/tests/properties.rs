mod common;

use erps::audit::{audit, Verdict};
use erps::estimation::{estimator, ErrorModel, XiDistribution, XiKind};
use erps::grid::Grid1D;
use erps::preparation::{
    build_gaussian, build_product, build_superposition, export_text, import_text, GaussianSpec,
    SuperpositionTerm,
};
use erps::sampler::{sample_bipartite, sample_shots, XiMode};
use erps::uncertainty::{analyze, c_functional, fisher_information, ms_error_p, ms_error_q};
use proptest::prelude::*;

fn gaussian_strategy() -> impl Strategy<Value = (GaussianSpec, f64)> {
    (
        -1.0f64..1.0,
        0.4f64..1.5,
        -3.0f64..3.0,
        -1.5f64..1.5,
        0.3f64..2.0,
    )
        .prop_map(|(q0, s, p0, c, hbar)| (GaussianSpec::new(q0, s, p0, c), hbar))
}

fn grid_for(spec: &GaussianSpec) -> Grid1D {
    Grid1D::symmetric(spec.q0.abs() + 8.0 * spec.sigma, 1024).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fisher_identity_and_saturation((spec, hbar) in gaussian_strategy()) {
        let p = build_gaussian(spec, grid_for(&spec), hbar).unwrap();
        let xi = XiDistribution::new(XiKind::TwoPoint, hbar);
        let j = fisher_information(&p);
        let e_p2 = ms_error_p(&p, &ErrorModel::Standard, &xi);
        prop_assert!((e_p2 - 0.25 * hbar * hbar * j).abs() <= 1e-8 * hbar * hbar * j);
        prop_assert!((j * spec.sigma * spec.sigma - 1.0).abs() <= 1e-6);
        let prod = e_p2 * ms_error_q(&p);
        prop_assert!((prod / (0.25 * hbar * hbar) - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn superpositions_respect_the_bounds(
        d in 1.0f64..3.5,
        w in 0.2f64..1.0,
        phase in 0.0f64..std::f64::consts::TAU,
        chirp in -0.5f64..0.5,
    ) {
        let g = Grid1D::symmetric(d + 9.0, 2048).unwrap();
        let terms = [
            SuperpositionTerm::real(1.0, GaussianSpec::new(-d, 1.0, 0.0, chirp)),
            SuperpositionTerm::new(num_complex::Complex64::from_polar(w, phase), GaussianSpec::new(d, 1.0, 0.0, chirp)),
        ];
        // Interference nodes are legitimate failures, not bound violations.
        if let Ok(p) = build_superposition(&terms, g, 1.0) {
            let r = analyze(&p, &ErrorModel::Standard, &XiDistribution::new(XiKind::TwoPoint, 1.0));
            if let Ok(r) = r {
                prop_assert!(r.cramer_rao().holds());
                prop_assert!(r.ms_tradeoff().holds());
                prop_assert!(r.hk_final().holds());
            }
        }
    }

    #[test]
    fn estimator_is_gauge_covariant((spec, hbar) in gaussian_strategy(), offset in -5.0f64..5.0) {
        let p = build_gaussian(spec, grid_for(&spec), hbar).unwrap();
        let a = estimator(&p);
        let b = estimator(&p.with_action_offset(offset));
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + offset.abs()));
        }
    }

    #[test]
    fn c_is_monotone_in_lambda(l1 in 0.0f64..3.0, dl in 0.01f64..2.0) {
        let p = common::item("skew-a").build(1024);
        prop_assert!(c_functional(&p, l1 + dl) > c_functional(&p, l1));
    }

    #[test]
    fn audit_verdicts_and_swap_invariance(
        (s1, _) in gaussian_strategy(),
        (s2, _) in gaussian_strategy(),
        lambda in prop_oneof![Just(0.0), 0.05f64..2.0],
    ) {
        let a = build_gaussian(s1, Grid1D::symmetric(12.0, 192).unwrap(), 1.0).unwrap();
        let b = build_gaussian(s2, Grid1D::symmetric(12.5, 208).unwrap(), 1.0).unwrap();
        let p = build_product(&a, &b).unwrap();
        let model = ErrorModel::LambdaModified { lambda };
        let r = audit(&p, &model, &[1.0, -1.0]).unwrap();
        let swapped = audit(&p.swapped(), &model, &[1.0, -1.0]).unwrap();
        prop_assert_eq!(r.verdict, swapped.verdict);
        prop_assert_eq!(r.normalized_leakage, swapped.normalized_leakage);
        let expected = if lambda == 0.0 { Verdict::Independent } else { Verdict::Violated };
        prop_assert_eq!(r.verdict, expected);
    }

    #[test]
    fn text_export_round_trips_superpositions(idx in 6usize..12) {
        let p = common::corpus()[idx].build(512);
        prop_assert_eq!(import_text(&export_text(&p)).unwrap(), p);
    }
}

#[test]
fn sampling_does_not_depend_on_thread_count() {
    let p = common::item("skew-b").build(1024);
    let xi = XiDistribution::new(XiKind::Gaussian, 1.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_shots(&p, &ErrorModel::Standard, &xi, 50_000, 99).unwrap())
    };
    assert_eq!(run(1), run(4));
    let b = build_product(&p, &common::item("gauss-unit").build(1024)).unwrap();
    let run2 = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                sample_bipartite(&b, &ErrorModel::Standard, &xi, XiMode::Separable, 20_000, 5)
                    .unwrap()
            })
    };
    assert_eq!(run2(1), run2(3));
}

#[test]
fn lambda_sweep_increases_error_and_bound() {
    let p = common::item("cat-3").build(2048);
    let xi = XiDistribution::new(XiKind::TwoPoint, 1.0);
    let mut prev = None;
    for lambda in [0.0, 0.5, 1.0, 2.0] {
        let r = analyze(&p, &ErrorModel::LambdaModified { lambda }, &xi).unwrap();
        assert!(r.violations().is_empty(), "{:?}", r.violations());
        if let Some((c, e)) = prev {
            assert!(r.c > c && r.e_p2 > e);
        }
        prev = Some((r.c, r.e_p2));
    }
}
