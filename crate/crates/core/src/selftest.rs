//! Quick randomised invariant checks on small grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gagliardo::{self, assemble_weights, OperatorParams};
use crate::grid::{build_grid, Domain, ScalarField};
use crate::kernels::{riesz_kernel_eval, RieszParams};
use crate::riesz::{riesz_gradient, ConvolutionPlan};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> SelfCheck {
    SelfCheck { name: name.into(), passed, detail }
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ScalarField {
    ScalarField::from_values((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

/// Runs every check with the given seed.
pub fn run_selftest(seed: u64) -> Result<Vec<SelfCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let grid = build_grid(&Domain::Interval { a: -1.0, b: 1.0 }, 33)?;
    let n = grid.interior_count();
    let table = assemble_weights(&grid, OperatorParams::new(0.6, 2.5)?)?;
    let u = random_field(&mut rng, n);
    let v = random_field(&mut rng, n);

    let lambda: f64 = rng.random_range(0.2..3.0);
    let a = gagliardo::seminorm(&u.scaled(-lambda), &table)?;
    let b = lambda * gagliardo::seminorm(&u, &table)?;
    out.push(check(
        "seminorm homogeneity",
        (a - b).abs() <= 1e-12 * b,
        format!("|[-l u]| = {a:.15e}, l |[u]| = {b:.15e}"),
    ));

    let w = u.combine(1.0, &v, 1.0);
    let lhs = gagliardo::seminorm(&w, &table)?;
    let rhs = gagliardo::seminorm(&u, &table)? + gagliardo::seminorm(&v, &table)?;
    out.push(check("seminorm triangle inequality", lhs <= rhs * (1.0 + 1e-12), format!("{lhs:.6e} <= {rhs:.6e}")));

    let pairing = gagliardo::apply_form(&u, &u, &table)?;
    let pow = gagliardo::seminorm_pow(&u, &table)?;
    out.push(check(
        "form on the diagonal",
        (pairing - pow).abs() <= 1e-12 * pow,
        format!("<A u, u> = {pairing:.15e}, |[u]|^p = {pow:.15e}"),
    ));

    let grad = gagliardo::operator_gradient(&u, &table)?;
    let k = rng.random_range(0..n);
    let eps = 1e-6;
    let mut up = u.clone();
    up.values_mut()[k] += eps;
    let mut um = u.clone();
    um.values_mut()[k] -= eps;
    let fd = (gagliardo::energy(&up, &table)? - gagliardo::energy(&um, &table)?) / (2.0 * eps);
    let g = grad.values()[k];
    out.push(check(
        "energy gradient against central difference",
        (fd - g).abs() <= 1e-6 * g.abs().max(1e-3),
        format!("node {k}: analytic {g:.10e}, difference {fd:.10e}"),
    ));

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let u1: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..2.0)).collect();
        let u2: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..2.0)).collect();
        let t = rng.random_range(0.0..1.0);
        worst = worst.max(gagliardo::hidden_convexity_violation(&u1, &u2, t, 2.5, 3.0));
    }
    out.push(check("hidden convexity on random pairs", worst <= 1e-12, format!("largest violation {worst:.3e}")));

    let params = RieszParams::new(2, 0.4)?;
    let x = [rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
    let t: f64 = rng.random_range(0.5..2.0);
    let k1 = riesz_kernel_eval(&params, &[t * x[0], t * x[1]])?;
    let k0 = riesz_kernel_eval(&params, &x)? * t.powf(0.4 - 2.0);
    out.push(check(
        "Riesz kernel homogeneity",
        (k1 - k0).abs() <= 1e-12 * k0,
        format!("I(tx) = {k1:.15e}, t^(a-N) I(x) = {k0:.15e}"),
    ));

    let g2 = build_grid(&Domain::Rectangle { a1: -1.0, b1: 1.0, a2: -1.0, b2: 1.0 }, 17)?;
    let plan = ConvolutionPlan::new(&g2, 0.7)?;
    let f = ScalarField::from_fn(&g2, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
    let fg = ScalarField::from_fn(&g2, |x| x[0].cos() * (1.0 - x[1] * x[1]));
    let c: f64 = rng.random_range(-2.0..2.0);
    let da = riesz_gradient(&g2, &f.combine(1.0, &fg, c), &plan)?;
    let db = riesz_gradient(&g2, &f, &plan)?;
    let dc = riesz_gradient(&g2, &fg, &plan)?;
    let err = da
        .raw()
        .iter()
        .zip(db.raw().iter().zip(dc.raw()))
        .map(|(a, (b, d))| (a - b - c * d).abs())
        .fold(0.0, f64::max);
    let scale = da.raw().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    out.push(check("fractional gradient linearity", err <= 1e-12 * scale, format!("max defect {err:.3e}")));

    Ok(out)
}
