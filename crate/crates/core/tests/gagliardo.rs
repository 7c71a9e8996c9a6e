mod common;

use common::{rel, tanh_sinh};
use fracsolve_core::gagliardo::{
    self, assemble_weights, assemble_weights_capped, load_or_assemble, OperatorParams,
};
use fracsolve_core::grid::{build_grid, Domain, Grid, ScalarField};
use fracsolve_core::Error;
use proptest::prelude::*;

fn line(res: usize) -> Grid {
    build_grid(&Domain::Interval { a: 0.0, b: 1.0 }, res).unwrap()
}

/// `int_0^h int_0^h (a + b)^beta db da`: two touching cells, singular corner at 0.
fn touching_cells(h: f64, beta: f64) -> f64 {
    tanh_sinh(0.0, h, |a| tanh_sinh(0.0, h, |b| (a + b).powf(beta)))
}

/// `int_{C_0} int_{C_0} |x - y|^beta = 2 int_0^h int_0^a c^beta dc da`.
fn same_cell(h: f64, beta: f64) -> f64 {
    2.0 * tanh_sinh(0.0, h, |a| tanh_sinh(0.0, a, |c| c.powf(beta)))
}

/// Cells separated by `k >= 2` lattice steps.
fn distant_cells(h: f64, k: f64, beta: f64) -> f64 {
    tanh_sinh(0.0, h, |x| tanh_sinh(0.0, h, |y| ((k - 1.0) * h + (h - x) + y).powf(beta)))
}

#[test]
fn two_node_weights_match_adaptive_quadrature() {
    for (s, p) in [(0.3, 2.0), (0.5, 2.5), (0.8, 3.0), (0.95, 2.2)] {
        let g = line(4);
        let h = g.spacing()[0];
        let table = assemble_weights(&g, OperatorParams::new(s, p).unwrap()).unwrap();
        let beta = p - 1.0 - s * p;
        let w1 = (touching_cells(h, beta) + 0.5 * same_cell(h, beta)) / h.powf(p);
        let w2 = distant_cells(h, 2.0, beta) / (2.0 * h).powf(p);
        assert!(rel(table.weight(0, 1), w1) < 1e-6, "s={s}, p={p}: {} vs {w1}", table.weight(0, 1));
        assert_eq!(table.weight(0, 1), table.weight(1, 0));

        // both boundary nodes plus the kernel mass beyond the box [-h/2, 1 + h/2]
        let sp = s * p;
        let (lo, hi) = (-0.5 * h, 1.0 + 0.5 * h);
        for (i, x) in [(0usize, h), (1, 2.0 * h)] {
            let tail = tanh_sinh(x - 0.5 * h, x + 0.5 * h, |t| ((t - lo).powf(-sp) + (hi - t).powf(-sp)) / sp);
            let ext = w1 + w2 + tail;
            assert!(rel(table.exterior(i), ext) < 1e-6, "exterior {i}: {} vs {ext}", table.exterior(i));
        }
    }
}

#[test]
fn hat_on_three_nodes_is_the_hand_expanded_sum() {
    let g = line(5);
    for p in [2.0, 2.5] {
        let table = assemble_weights(&g, OperatorParams::new(0.6, p).unwrap()).unwrap();
        let u = ScalarField::from_interior(&g, vec![0.0, 1.0, 0.0]).unwrap();
        let hand = 2.0 * (table.weight(0, 1) + table.weight(1, 2)) + 2.0 * table.exterior(1);
        assert!(rel(gagliardo::seminorm_pow(&u, &table).unwrap(), hand) < 1e-14);
        let v = ScalarField::from_interior(&g, vec![0.5, 1.0, -0.25]).unwrap();
        let pairs = [(0, 1, 0.5f64), (0, 2, 0.75), (1, 2, 1.25)];
        let mut hand = 0.0;
        for (i, j, d) in pairs {
            hand += 2.0 * table.weight(i, j) * d.powf(p);
        }
        for (i, x) in [0.5f64, 1.0, 0.25].iter().enumerate() {
            hand += 2.0 * table.exterior(i) * x.powf(p);
        }
        assert!(rel(gagliardo::seminorm_pow(&v, &table).unwrap(), hand) < 1e-14);
    }
}

#[test]
fn zero_field_gives_zero_everywhere() {
    let g = line(17);
    let table = assemble_weights(&g, OperatorParams::new(0.5, 2.5).unwrap()).unwrap();
    let z = ScalarField::zeros(&g);
    let phi = ScalarField::from_fn(&g, |x| x[0].sin());
    assert_eq!(gagliardo::seminorm(&z, &table).unwrap(), 0.0);
    assert_eq!(gagliardo::energy(&z, &table).unwrap(), 0.0);
    assert_eq!(gagliardo::apply_form(&z, &phi, &table).unwrap(), 0.0);
    assert!(gagliardo::operator_gradient(&z, &table).unwrap().values().iter().all(|&v| v == 0.0));
}

#[test]
fn refinement_changes_smooth_seminorm_little() {
    for (s, p) in [(0.4, 2.0), (0.6, 3.0)] {
        let norm = |res: usize| {
            let g = line(res);
            let t = assemble_weights(&g, OperatorParams::new(s, p).unwrap()).unwrap();
            let u = ScalarField::from_fn(&g, |x| (std::f64::consts::PI * x[0]).sin());
            gagliardo::seminorm(&u, &t).unwrap()
        };
        let (a, b) = (norm(65), norm(129));
        assert!(rel(a, b) < 0.05, "s={s}, p={p}: {a} vs {b}");
    }
    let disk = |res: usize| {
        let g = build_grid(&Domain::Disk { center: [0.0, 0.0], radius: 1.0 }, res).unwrap();
        let t = assemble_weights(&g, OperatorParams::new(0.5, 2.0).unwrap()).unwrap();
        let u = ScalarField::from_fn(&g, |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
        gagliardo::seminorm(&u, &t).unwrap()
    };
    let (a, b) = (disk(17), disk(33));
    assert!(rel(a, b) < 0.05, "disk: {a} vs {b}");
}

#[test]
fn weights_are_symmetric_in_two_dimensions() {
    let g = build_grid(&Domain::Rectangle { a1: 0.0, b1: 1.0, a2: 0.0, b2: 2.0 }, 9).unwrap();
    let t = assemble_weights(&g, OperatorParams::new(0.7, 2.5).unwrap()).unwrap();
    let n = g.interior_count();
    for i in 0..n {
        assert!(t.exterior(i) > 0.0);
        for j in 0..n {
            if i != j {
                assert_eq!(t.weight(i, j), t.weight(j, i));
                assert!(t.weight(i, j) > 0.0);
            }
        }
    }
}

#[test]
fn node_cap_is_enforced() {
    let g = line(40);
    let r = assemble_weights_capped(&g, OperatorParams::new(0.5, 2.0).unwrap(), 10);
    assert!(matches!(r, Err(Error::MemoryBudget { nodes: 38, cap: 10 })));
}

#[test]
fn cached_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let g = build_grid(&Domain::Disk { center: [0.0, 0.0], radius: 1.0 }, 11).unwrap();
    let params = OperatorParams::new(0.55, 2.7).unwrap();
    let fresh = load_or_assemble(&g, params, 4096, Some(dir.path())).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    let cached = load_or_assemble(&g, params, 4096, Some(dir.path())).unwrap();
    let direct = assemble_weights(&g, params).unwrap();
    let u = ScalarField::from_fn(&g, |x| (x[0] + 2.0 * x[1]).cos());
    let a = gagliardo::seminorm_pow(&u, &fresh).unwrap();
    assert_eq!(a, gagliardo::seminorm_pow(&u, &cached).unwrap());
    assert_eq!(a, gagliardo::seminorm_pow(&u, &direct).unwrap());
}

fn field(values: Vec<f64>, g: &Grid) -> ScalarField {
    ScalarField::from_interior(g, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn seminorm_and_energy_are_homogeneous(
        u in prop::collection::vec(-2.0f64..2.0, 15),
        lambda in 0.1f64..4.0,
        sp in (0.2f64..0.95, 1.5f64..3.5),
    ) {
        let g = line(17);
        let (s, p) = sp;
        let t = assemble_weights(&g, OperatorParams::new(s, p).unwrap()).unwrap();
        let u = field(u, &g);
        let lu = u.scaled(lambda);
        let a = gagliardo::seminorm(&u, &t).unwrap();
        prop_assert!(rel(gagliardo::seminorm(&lu, &t).unwrap(), lambda * a) < 1e-12 || a == 0.0);
        let e = gagliardo::energy(&u, &t).unwrap();
        prop_assert!((gagliardo::energy(&lu, &t).unwrap() - lambda.powf(p) * e).abs() <= 1e-12 * lambda.powf(p) * e.max(1e-300));
        prop_assert!((p * e - a.powf(p)).abs() <= 1e-12 * p * e.max(1e-300));
        let gu = gagliardo::operator_gradient(&u, &t).unwrap();
        let glu = gagliardo::operator_gradient(&lu, &t).unwrap();
        let scale = lambda.powf(p - 1.0);
        for (x, y) in gu.values().iter().zip(glu.values()) {
            prop_assert!((y - scale * x).abs() <= 1e-11 * scale * gu.max_abs().max(1e-300));
        }
    }

    #[test]
    fn energy_is_convex_along_segments(
        u in prop::collection::vec(-2.0f64..2.0, 15),
        w in prop::collection::vec(-2.0f64..2.0, 15),
        t in 0.0f64..1.0,
        p in 1.5f64..3.5,
    ) {
        let g = line(17);
        let table = assemble_weights(&g, OperatorParams::new(0.6, p).unwrap()).unwrap();
        let (u, w) = (field(u, &g), field(w, &g));
        let mid = u.combine(1.0 - t, &w, t);
        let lhs = gagliardo::energy(&mid, &table).unwrap();
        let rhs = (1.0 - t) * gagliardo::energy(&u, &table).unwrap() + t * gagliardo::energy(&w, &table).unwrap();
        prop_assert!(lhs <= rhs + 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences(
        u in prop::collection::vec(-1.0f64..1.0, 15),
        k in 0usize..15,
        p in prop::sample::select(vec![2.0, 2.5, 3.0]),
    ) {
        let g = line(17);
        let table = assemble_weights(&g, OperatorParams::new(0.7, p).unwrap()).unwrap();
        let u = field(u, &g);
        let eps = 1e-6;
        let mut up = u.clone();
        up.values_mut()[k] += eps;
        let mut um = u.clone();
        um.values_mut()[k] -= eps;
        let fd = (gagliardo::energy(&up, &table).unwrap() - gagliardo::energy(&um, &table).unwrap()) / (2.0 * eps);
        let an = gagliardo::operator_gradient(&u, &table).unwrap().values()[k];
        prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-2), "{} vs {}", fd, an);
    }

    #[test]
    fn form_is_linear_in_the_test_function(
        u in prop::collection::vec(-1.0f64..1.0, 15),
        a in prop::collection::vec(-1.0f64..1.0, 15),
        b in prop::collection::vec(-1.0f64..1.0, 15),
        c in -3.0f64..3.0,
    ) {
        let g = line(17);
        let table = assemble_weights(&g, OperatorParams::new(0.5, 2.8).unwrap()).unwrap();
        let (u, a, b) = (field(u, &g), field(a, &g), field(b, &g));
        let lhs = gagliardo::apply_form(&u, &a.combine(1.0, &b, c), &table).unwrap();
        let rhs = gagliardo::apply_form(&u, &a, &table).unwrap() + c * gagliardo::apply_form(&u, &b, &table).unwrap();
        let scale = gagliardo::seminorm_pow(&u, &table).unwrap().max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale * (1.0 + c.abs()));
    }
}
