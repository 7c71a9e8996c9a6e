mod common;

use common::{rel, tanh_sinh};
use fracsolve_core::grid::{build_grid, Domain, ScalarField};
use fracsolve_core::reaction::{
    check_hypotheses, f_eval, f_truncated, g_eval, ConvectiveReaction, ProblemExponents, ReactionFamily,
    SingularReaction, TruncatedReaction, Weight, F_truncated, HF2,
};
use fracsolve_core::Error;
use proptest::prelude::*;

fn f(gamma: f64, r: f64) -> SingularReaction {
    SingularReaction { gamma, c1: 1.0, c2: 1.0, r, family: ReactionFamily::Singular, weight: Weight::Uniform }
}

fn exps(dim: usize, s: f64, s1: f64, s2: f64, p: f64, q: f64) -> ProblemExponents {
    ProblemExponents { dim, s, s1, s2, p, q }
}

const G: ConvectiveReaction = ConvectiveReaction { c3: 0.1, zeta: 1.5 };

#[test]
fn point_values() {
    assert!((f_eval(&f(0.5, 1.5), &[0.2, 0.3], 4.0).unwrap() - 8.5).abs() < 1e-14);
    assert!((g_eval(&G, &[0.0], &[4.0]) - 0.9).abs() < 1e-15);
    assert!(matches!(f_eval(&f(0.5, 1.5), &[0.0], -1.0), Err(Error::Domain(_))));
    let weighted = SingularReaction {
        weight: Weight::Gaussian { amplitude: 1.0, center: [0.0, 0.0], width: 1.0 },
        ..f(0.5, 1.5)
    };
    assert!((f_eval(&weighted, &[0.0, 0.0], 4.0).unwrap() - 17.0).abs() < 1e-13);
}

#[test]
fn antiderivatives_match_quadrature() {
    for family in [ReactionFamily::Singular, ReactionFamily::Bounded] {
        let react = SingularReaction { family, c1: 0.7, c2: 1.3, ..f(0.6, 1.4) };
        for t in [0.01, 0.5, 3.0] {
            let quad = tanh_sinh(0.0, t, |x| react.profile(x));
            assert!(rel(react.profile_antiderivative(t), quad) < 1e-10, "{family:?}, t={t}");
            let h = 1e-5 * t;
            let fd = (react.profile(t + h) - react.profile(t - h)) / (2.0 * h);
            assert!(rel(react.profile_derivative(t), fd) < 1e-7);
        }
    }
}

#[test]
fn truncation_follows_the_max_rule_and_is_continuous() {
    let g = build_grid(&Domain::Interval { a: 0.0, b: 1.0 }, 9).unwrap();
    let floor = ScalarField::from_fn(&g, |x| 0.1 + x[0] * (1.0 - x[0]));
    let base = f(0.3, 1.2);
    let tr = TruncatedReaction::new(&g, base.clone(), &floor).unwrap();
    for k in 0..g.interior_count() {
        let u = floor.values()[k];
        for t in [-2.0, 0.0, 0.5 * u, u, 1.5 * u, 4.0] {
            assert_eq!(f_truncated(&tr, k, t), base.profile(u.max(t)));
        }
        let (below, above) = (f_truncated(&tr, k, u * (1.0 - 1e-12)), f_truncated(&tr, k, u * (1.0 + 1e-12)));
        assert!((below - above).abs() < 1e-9 * below);
        // linear below the floor, including negative arguments
        for tau in [-1.0, -0.01, 0.3 * u] {
            assert!((F_truncated(&tr, k, tau) - base.profile(u) * tau).abs() < 1e-15);
        }
    }
    let bad = ScalarField::from_fn(&g, |x| x[0] - 0.5);
    assert!(matches!(TruncatedReaction::new(&g, base, &bad), Err(Error::Invariant(_))));
}

#[test]
fn convection_depends_on_the_norm_only() {
    for v in [[3.0, 4.0], [-5.0, 0.0], [0.0, 5.0]] {
        assert!((g_eval(&G, &[0.0, 0.0], &v) - 0.1 * (1.0 + 5f64.powf(1.5))).abs() < 1e-14);
    }
}

#[test]
fn parameter_windows() {
    let base = f(0.3, 1.2);
    let ok = exps(4, 0.7, 0.9, 0.6, 3.4, 2.5);
    let rep = check_hypotheses(&ok, &base, &G);
    assert!(rep.passed() && rep.uniqueness_applies(), "{rep}");

    let fails = |e: ProblemExponents, react: &SingularReaction, g: &ConvectiveReaction| -> Vec<String> {
        check_hypotheses(&e, react, g).failures().map(|c| c.name.clone()).collect()
    };
    assert_eq!(fails(exps(4, 0.7, 0.9, 0.6, 3.4, 3.4), &base, &G), ["2<q<p<N/s1"]);
    assert_eq!(fails(ok, &f(1.0, 1.2), &G)[0], "0<gamma<1");
    assert_eq!(fails(ok, &f(0.3, 2.4), &G), ["1<r<p-1"]);
    assert_eq!(fails(ok, &base, &ConvectiveReaction { c3: 0.1, zeta: 2.4 }), ["1<zeta<p-1"]);
    assert_eq!(fails(ok, &base, &ConvectiveReaction { c3: -0.1, zeta: 1.5 }), ["c3>=0"]);
    // q' s2 = s1 with q = 2.5, s2 = 0.54
    assert_eq!(fails(exps(4, 0.7, 0.9, 0.54, 3.4, 2.5), &base, &G), ["q's2!=s1"]);
    // 1/(p' gamma) = (1 - 1/p) / gamma < s1 for gamma = 0.8
    assert_eq!(fails(ok, &f(0.8, 1.2), &G), ["s1<1/(p'gamma)"]);
    assert!(matches!(check_hypotheses(&ok, &f(1.0, 1.2), &G).into_result(), Err(Error::Hypothesis { .. })));
}

#[test]
fn growth_at_q_minus_one_disables_uniqueness_only() {
    let e = exps(2, 0.55, 0.6, 0.5, 3.0, 2.5);
    let rep = check_hypotheses(&e, &f(0.3, 1.5), &G);
    assert!(rep.passed());
    assert!(!rep.uniqueness_applies());
    assert!(rep.warnings().any(|c| c.name == HF2));
    assert!(check_hypotheses(&e, &f(0.3, 1.4), &G).uniqueness_applies());
}

#[test]
fn line_problems_waive_the_critical_ratio() {
    let e = exps(1, 0.6, 0.7, 0.5, 3.0, 2.5);
    let rep = check_hypotheses(&e, &f(0.3, 1.2), &G);
    assert!(rep.passed(), "{rep}");
    assert!(rep.warnings().any(|c| c.name == "p<N/s1"));
    assert!(check_hypotheses(&exps(1, 0.6, 0.7, 0.5, 1.4, 1.2), &f(0.3, 1.2), &G).failures().count() > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncated_primitive_differentiates_to_truncated_value(
        gamma in 0.05f64..0.95,
        r in 1.01f64..2.5,
        floor in 0.05f64..2.0,
        t in 0.01f64..4.0,
    ) {
        let g = build_grid(&Domain::Interval { a: 0.0, b: 1.0 }, 3).unwrap();
        let tr = TruncatedReaction::new(&g, f(gamma, r), &ScalarField::constant(&g, floor)).unwrap();
        prop_assume!((t - floor).abs() > 1e-3);
        let h = 1e-6 * t.max(floor);
        let fd = (F_truncated(&tr, 0, t + h) - F_truncated(&tr, 0, t - h)) / (2.0 * h);
        prop_assert!(rel(fd, f_truncated(&tr, 0, t)) < 1e-6);
        prop_assert!(f_truncated(&tr, 0, t) <= f_truncated(&tr, 0, floor) || t > floor);
    }

    #[test]
    fn quotient_decreases_when_growth_is_subcritical(gamma in 0.05f64..0.95, q in 2.05f64..4.0, frac in 0.05f64..0.95) {
        let r = 1.0 + frac * (q - 2.0);
        let e = exps(2, 0.5, 0.5, 0.5, q + 0.5, q);
        let g = ConvectiveReaction { c3: 0.1, zeta: 1.1 };
        let rep = check_hypotheses(&e, &f(gamma, r), &g);
        prop_assert!(rep.uniqueness_applies());
    }
}
