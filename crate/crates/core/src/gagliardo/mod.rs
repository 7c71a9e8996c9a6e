//! Discrete Gagliardo seminorm, energy and weak form of the fractional
//! p-Laplacian with homogeneous exterior data.
//!
//! With pair weights `W_ij` and exterior weights `W_i^ext`,
//!
//! ```text
//! [u]^p        = 2 sum_{i<j} W_ij |u_i - u_j|^p + 2 sum_i W_i^ext |u_i|^p
//! <A u, phi>   = 2 sum_{i<j} W_ij psi(u_i - u_j)(phi_i - phi_j) + 2 sum_i W_i^ext psi(u_i) phi_i
//! ```
//!
//! where `psi(t) = |t|^{p-2} t`.

mod cache;
pub(crate) mod weights;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::numeric::CompensatedSum;

pub use cache::{cache_key, load_or_assemble};

/// Default cap on interior nodes for a pair table.
pub const DEFAULT_NODE_CAP: usize = 4096;

/// Fractional order and integrability exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    s: f64,
    p: f64,
}

impl OperatorParams {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain(format!("fractional order s = {s} outside (0, 1)")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::domain(format!("exponent p = {p} must exceed 1")));
        }
        Ok(Self { s, p })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Translation-invariant pair weights plus per-node exterior weights.
#[derive(Clone, Debug)]
pub struct PairWeightTable {
    params: OperatorParams,
    dim: usize,
    shape: [usize; 2],
    spacing: [f64; 2],
    stencil: Vec<f64>,
    lattice: Vec<[u32; 2]>,
    exterior: Vec<f64>,
}

/// Assembles the table with the default node cap.
pub fn assemble_weights(grid: &Grid, params: OperatorParams) -> Result<PairWeightTable> {
    assemble_weights_capped(grid, params, DEFAULT_NODE_CAP)
}

pub fn assemble_weights_capped(
    grid: &Grid,
    params: OperatorParams,
    node_cap: usize,
) -> Result<PairWeightTable> {
    let n = grid.interior_count();
    if n > node_cap {
        return Err(Error::MemoryBudget { nodes: n, cap: node_cap });
    }
    let dim = grid.dim();
    let shape = grid.shape();
    let h = grid.spacing();
    let (s, p) = (params.s, params.p);
    let stencil = match dim {
        1 => weights::stencil_1d(h[0], s, p, shape[0]),
        _ => weights::stencil_2d(h, s, p, shape),
    };
    let lattice: Vec<[u32; 2]> = (0..n)
        .map(|k| {
            let [ix, iy] = grid.interior_lattice(k);
            [ix as u32, iy as u32]
        })
        .collect();

    // in-box nodes that carry no unknown
    let outside: Vec<[usize; 2]> = (0..grid.node_count())
        .filter(|&node| !grid.is_interior(node))
        .map(|node| grid.node_lattice(node))
        .collect();
    let origin = grid.origin();
    let lo = [origin[0] - 0.5 * h[0], origin[1] - 0.5 * h[1]];
    let hi = [
        origin[0] + (shape[0] as f64 - 0.5) * h[0],
        origin[1] + (shape[1] as f64 - 0.5) * h[1],
    ];
    let sp = s * p;
    let exterior: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let [ix, iy] = grid.interior_lattice(k);
            let mut acc = CompensatedSum::new();
            for b in &outside {
                let idx = ix.abs_diff(b[0]) + shape[0] * iy.abs_diff(b[1]);
                acc.add(stencil[idx]);
            }
            let x = grid.interior_coords(k);
            let cx = [x[0] - 0.5 * h[0], x[0] + 0.5 * h[0]];
            let tail = if dim == 1 {
                weights::tail_1d(cx, lo[0], hi[0], sp)
            } else {
                let cy = [x[1] - 0.5 * h[1], x[1] + 0.5 * h[1]];
                weights::tail_2d(cx, cy, lo, hi, sp)
            };
            acc.add(tail);
            acc.value()
        })
        .collect();

    let table = PairWeightTable {
        params,
        dim,
        shape,
        spacing: h,
        stencil,
        lattice,
        exterior,
    };
    table.validate()?;
    Ok(table)
}

#[inline]
fn psi(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.abs().powf(p - 2.0) * t
    }
}

impl PairWeightTable {
    pub(crate) fn from_parts(
        params: OperatorParams,
        dim: usize,
        shape: [usize; 2],
        spacing: [f64; 2],
        stencil: Vec<f64>,
        lattice: Vec<[u32; 2]>,
        exterior: Vec<f64>,
    ) -> Result<Self> {
        let table = Self {
            params,
            dim,
            shape,
            spacing,
            stencil,
            lattice,
            exterior,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        if self.stencil.len() != self.shape[0] * self.shape[1] || self.exterior.len() != self.lattice.len() {
            return Err(Error::Invariant("pair table arrays have inconsistent sizes".into()));
        }
        let bad_stencil = self.stencil.iter().skip(1).any(|w| !(w.is_finite() && *w > 0.0));
        let bad_ext = self.exterior.iter().any(|w| !(w.is_finite() && *w > 0.0));
        if bad_stencil || bad_ext || self.stencil[0] != 0.0 {
            return Err(Error::Invariant("pair weights must be finite and positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> OperatorParams {
        self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interior_count(&self) -> usize {
        self.lattice.len()
    }

    pub(crate) fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub(crate) fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub(crate) fn stencil(&self) -> &[f64] {
        &self.stencil
    }

    /// Weight of the unordered pair of interior slots `(i, j)`, `i != j`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let a = self.lattice[i];
        let b = self.lattice[j];
        self.stencil[(a[0].abs_diff(b[0]) as usize) + self.shape[0] * (a[1].abs_diff(b[1]) as usize)]
    }

    /// Exterior weight of interior slot `i`.
    #[inline]
    pub fn exterior(&self, i: usize) -> f64 {
        self.exterior[i]
    }

    pub fn exterior_weights(&self) -> &[f64] {
        &self.exterior
    }

    /// Whether the table was assembled for `grid`.
    pub fn matches(&self, grid: &Grid) -> bool {
        grid.shape() == self.shape
            && grid.spacing() == self.spacing
            && grid.interior_count() == self.lattice.len()
            && (0..self.lattice.len()).all(|k| {
                let [ix, iy] = grid.interior_lattice(k);
                self.lattice[k] == [ix as u32, iy as u32]
            })
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if u.len() != self.lattice.len() {
            return Err(Error::Mismatch(format!(
                "field has {} values, table has {} interior nodes",
                u.len(),
                self.lattice.len()
            )));
        }
        Ok(())
    }

    /// `sum_i sum_{j > i} f(i, j, W_ij) + sum_i g(i, W_i^ext)` with ordered,
    /// compensated row reductions.
    fn pair_sum<F, G>(&self, f: F, g: G) -> f64
    where
        F: Fn(usize, usize, f64) -> f64 + Sync,
        G: Fn(usize, f64) -> f64 + Sync,
    {
        let n = self.lattice.len();
        let rows: Vec<CompensatedSum> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = CompensatedSum::new();
                for j in (i + 1)..n {
                    acc.add(f(i, j, self.weight(i, j)));
                }
                acc.add(g(i, self.exterior[i]));
                acc
            })
            .collect();
        let mut total = CompensatedSum::new();
        for r in rows {
            total.merge(r);
        }
        total.value()
    }
}

/// `[u]_{s,p}^p`.
pub fn seminorm_pow(u: &ScalarField, table: &PairWeightTable) -> Result<f64> {
    table.check(u)?;
    let p = table.params.p;
    let v = u.values();
    Ok(2.0
        * table.pair_sum(
            |i, j, w| w * (v[i] - v[j]).abs().powf(p),
            |i, w| w * v[i].abs().powf(p),
        ))
}

/// `[u]_{s,p}`.
pub fn seminorm(u: &ScalarField, table: &PairWeightTable) -> Result<f64> {
    Ok(seminorm_pow(u, table)?.powf(1.0 / table.params.p))
}

/// `(1/p) [u]_{s,p}^p`.
pub fn energy(u: &ScalarField, table: &PairWeightTable) -> Result<f64> {
    Ok(seminorm_pow(u, table)? / table.params.p)
}

/// Weak form `<(-Delta)^s_p u, phi>`. When `phi` has small support only
/// pairs touching the support are visited.
pub fn apply_form(u: &ScalarField, phi: &ScalarField, table: &PairWeightTable) -> Result<f64> {
    table.check(u)?;
    table.check(phi)?;
    let p = table.params.p;
    let v = u.values();
    let f = phi.values();
    let n = v.len();
    let support: Vec<usize> = (0..n).filter(|&i| f[i] != 0.0).collect();
    if support.len() * 4 >= n {
        return Ok(2.0
            * table.pair_sum(
                |i, j, w| w * psi(v[i] - v[j], p) * (f[i] - f[j]),
                |i, w| w * psi(v[i], p) * f[i],
            ));
    }
    let mut acc = CompensatedSum::new();
    for &i in &support {
        for j in 0..n {
            // pairs inside the support are visited once, from the smaller index
            if j == i || (f[j] != 0.0 && j < i) {
                continue;
            }
            acc.add(table.weight(i, j) * psi(v[i] - v[j], p) * (f[i] - f[j]));
        }
        acc.add(table.exterior[i] * psi(v[i], p) * f[i]);
    }
    Ok(2.0 * acc.value())
}

/// Nodal gradient of [`energy`]: `G_i = <(-Delta)^s_p u, e_i>`.
pub fn operator_gradient(u: &ScalarField, table: &PairWeightTable) -> Result<ScalarField> {
    table.check(u)?;
    let p = table.params.p;
    let v = u.values();
    let n = v.len();
    let g: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = CompensatedSum::new();
            for j in 0..n {
                if j != i {
                    acc.add(table.weight(i, j) * psi(v[i] - v[j], p));
                }
            }
            acc.add(table.exterior[i] * psi(v[i], p));
            2.0 * acc.value()
        })
        .collect();
    Ok(ScalarField::from_values(g))
}

/// Dense Hessian of [`energy`], row-major `n x n`. Requires `p >= 2`.
pub fn operator_hessian(u: &ScalarField, table: &PairWeightTable) -> Result<Vec<f64>> {
    table.check(u)?;
    let p = table.params.p;
    if p < 2.0 {
        return Err(Error::domain("Hessian of the p-energy needs p >= 2"));
    }
    let v = u.values();
    let n = v.len();
    let curv = |t: f64| {
        if p == 2.0 {
            1.0
        } else {
            (p - 1.0) * t.abs().powf(p - 2.0)
        }
    };
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            let mut diag = CompensatedSum::new();
            for j in 0..n {
                if j != i {
                    let c = 2.0 * table.weight(i, j) * curv(v[i] - v[j]);
                    row[j] = -c;
                    diag.add(c);
                }
            }
            diag.add(2.0 * table.exterior[i] * curv(v[i]));
            row[i] = diag.value();
            row
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Largest violation over all node pairs (exterior zero included) of
/// `|v3(x)-v3(y)|^p <= (1-t)|v1(x)-v1(y)|^p + t|v2(x)-v2(y)|^p`,
/// where `v_i = u_i^{1/q}` and `v3 = ((1-t)u1 + t u2)^{1/q}`.
/// Negative values mean the inequality holds with room to spare.
pub fn hidden_convexity_violation(u1: &[f64], u2: &[f64], t: f64, q: f64, p: f64) -> f64 {
    let root = |x: f64| x.max(0.0).powf(1.0 / q);
    let mut v1: Vec<f64> = u1.iter().map(|&x| root(x)).collect();
    let mut v2: Vec<f64> = u2.iter().map(|&x| root(x)).collect();
    let mut v3: Vec<f64> = u1
        .iter()
        .zip(u2)
        .map(|(&a, &b)| root((1.0 - t) * a + t * b))
        .collect();
    v1.push(0.0);
    v2.push(0.0);
    v3.push(0.0);
    let n = v1.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst = f64::NEG_INFINITY;
            for j in (i + 1)..n {
                let lhs = (v3[i] - v3[j]).abs().powf(p);
                let rhs = (1.0 - t) * (v1[i] - v1[j]).abs().powf(p) + t * (v2[i] - v2[j]).abs().powf(p);
                worst = worst.max(lhs - rhs);
            }
            worst
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// `Phi(w^{1/q})` for nonnegative `w`, the energy in the `q`-th power variable.
pub fn hidden_energy(w: &ScalarField, q: f64, table: &PairWeightTable) -> Result<f64> {
    energy(&w.map(|x| x.max(0.0).powf(1.0 / q)), table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};

    fn table_1d(res: usize, s: f64, p: f64) -> (Grid, PairWeightTable) {
        let g = build_grid(&Domain::Interval { a: 0.0, b: 1.0 }, res).unwrap();
        let t = assemble_weights(&g, OperatorParams::new(s, p).unwrap()).unwrap();
        (g, t)
    }

    #[test]
    fn rejects_bad_params() {
        assert!(OperatorParams::new(1.0, 2.0).is_err());
        assert!(OperatorParams::new(0.5, 1.0).is_err());
    }

    #[test]
    fn node_cap_enforced() {
        let g = build_grid(&Domain::Interval { a: 0.0, b: 1.0 }, 40).unwrap();
        let err = assemble_weights_capped(&g, OperatorParams::new(0.5, 2.0).unwrap(), 10).unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { nodes: 38, cap: 10 }));
    }

    #[test]
    fn hat_on_three_nodes_expands_by_hand() {
        let (g, t) = table_1d(5, 0.5, 2.0);
        let u = ScalarField::from_interior(&g, vec![0.0, 1.0, 0.0]).unwrap();
        let hand = 2.0 * (t.weight(0, 1) + t.weight(1, 2)) + 2.0 * t.exterior(1);
        assert!((seminorm_pow(&u, &t).unwrap() - hand).abs() < 1e-14 * hand);
    }

    #[test]
    fn zero_field_has_zero_forms() {
        let (g, t) = table_1d(9, 0.7, 2.5);
        let z = ScalarField::zeros(&g);
        assert_eq!(seminorm(&z, &t).unwrap(), 0.0);
        let phi = ScalarField::constant(&g, 1.0);
        assert_eq!(apply_form(&z, &phi, &t).unwrap(), 0.0);
        assert!(operator_gradient(&z, &t).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sparse_and_dense_form_paths_agree() {
        let (g, t) = table_1d(33, 0.6, 3.0);
        let u = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() + x[0]);
        let grad = operator_gradient(&u, &t).unwrap();
        let mut e = ScalarField::zeros(&g);
        e.values_mut()[7] = 1.0;
        e.values_mut()[8] = -0.5;
        let sparse = apply_form(&u, &e, &t).unwrap();
        let dense = grad.values()[7] - 0.5 * grad.values()[8];
        assert!((sparse - dense).abs() < 1e-12 * dense.abs());
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let (g, t) = table_1d(9, 0.5, 3.0);
        let u = ScalarField::from_fn(&g, |x| x[0] * (1.0 - x[0]) + 0.1 * x[0]);
        let hess = operator_hessian(&u, &t).unwrap();
        let n = u.len();
        let eps = 1e-6;
        for j in 0..n {
            let mut up = u.clone();
            up.values_mut()[j] += eps;
            let mut dn = u.clone();
            dn.values_mut()[j] -= eps;
            let gp = operator_gradient(&up, &t).unwrap();
            let gm = operator_gradient(&dn, &t).unwrap();
            for i in 0..n {
                let fd = (gp.values()[i] - gm.values()[i]) / (2.0 * eps);
                let h = hess[i * n + j];
                assert!((fd - h).abs() < 1e-5 * h.abs().max(1.0), "({i},{j}) {fd} vs {h}");
            }
        }
    }

    #[test]
    fn affine_profile_is_exact_in_one_dimension() {
        // pairs of the interior see |x - y|^{p-1-sp} exactly for affine data
        let (g, t) = table_1d(17, 0.4, 2.0);
        let (s, p) = (0.4, 2.0);
        let beta = p - 1.0 - s * p;
        let h = g.spacing()[0];
        let i = 3usize;
        let j = 11usize;
        let k = (j - i) as f64;
        let exact = crate::numeric::integrate_composite(-h, h, 8, 16, |w| (h - w.abs()) * (k * h + w).abs().powf(beta));
        assert!((t.weight(i, j) * (k * h).powf(p) - exact).abs() < 1e-12 * exact);
    }
}
