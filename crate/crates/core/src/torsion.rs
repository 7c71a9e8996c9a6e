//! Positive sub-solution from the torsion problem
//! `(-Delta)^{s1}_p u + (-Delta)^{s2}_q u = sigma`, and the lower bound
//! `eta d^{s1} <= u` that it certifies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frozen::{solve_frozen_from, FrozenProblem, MinimizerOptions, Source};
use crate::gagliardo::{self, PairWeightTable};
use crate::grid::{distance_field, integrate, Grid, ScalarField};
use crate::reaction::{ProblemExponents, ReactionFamily, SingularReaction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorsionSolution {
    pub u: ScalarField,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Scalar `lambda` minimising the torsion energy along `lambda * phi`.
fn profile_scale(phi: &ScalarField, grid: &Grid, sigma: f64, tp: &PairWeightTable, tq: &PairWeightTable) -> Result<f64> {
    let ap = gagliardo::energy(phi, tp)?;
    let aq = gagliardo::energy(phi, tq)?;
    let b = sigma * integrate(grid, phi);
    let (p, q) = (tp.params().p(), tq.params().p());
    let slope = |l: f64| p * l.powf(p - 1.0) * ap + q * l.powf(q - 1.0) * aq - b;
    let mut hi = 1.0;
    while slope(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the torsion problem for `sigma > 0` by energy minimisation.
pub fn solve_torsion(
    sigma: f64,
    grid: &Grid,
    table_p: Arc<PairWeightTable>,
    table_q: Arc<PairWeightTable>,
    s1: f64,
    opts: &MinimizerOptions,
) -> Result<TorsionSolution> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("torsion level sigma = {sigma} must be positive")));
    }
    let prob = FrozenProblem::with_forcing(
        grid,
        table_p.clone(),
        table_q.clone(),
        Source::Constant(sigma),
        vec![0.0; grid.interior_count()],
    )?;
    let d = distance_field(grid);
    let dmax = d.max_abs();
    let phi = d.map(|v| (v / dmax).powf(s1));
    let lambda = profile_scale(&phi, grid, sigma, &table_p, &table_q)?;
    let mut local = *opts;
    local.tolerance = opts.tolerance.min(1e-6 * sigma * grid.cell_volume());
    let sol = solve_frozen_from(&prob, phi.scaled(lambda).into_values(), &local)?;
    if !sol.converged {
        return Err(Error::NonConvergence(format!(
            "torsion solve at sigma = {sigma:.3e} stopped with residual {:.3e}",
            sol.residual
        )));
    }
    if sol.u.min() <= 0.0 {
        return Err(Error::Invariant(format!(
            "torsion solution at sigma = {sigma:.3e} is not positive (min {:.3e})",
            sol.u.min()
        )));
    }
    Ok(TorsionSolution {
        u: sol.u,
        residual: sol.residual,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

/// Exponent of the lower bound: `s1`, or some `alpha > s1` avoiding `q' s2`
/// and `p' s1` when `q' s2 = s1`.
pub fn hopf_exponent(e: &ProblemExponents) -> f64 {
    if !e.critical_pairing() {
        return e.s1;
    }
    let mut alpha = e.s1 + 0.05f64.min(0.5 * (1.0 - e.s1));
    let forbidden = [e.q_conj() * e.s2, e.p_conj() * e.s1];
    while forbidden.iter().any(|f| (alpha - f).abs() < 1e-9) {
        alpha += 0.011;
    }
    alpha
}

/// `eta = min_i u_i / d_i^exponent`.
pub fn hopf_ratio(u: &ScalarField, d: &ScalarField, exponent: f64) -> Result<f64> {
    if u.len() != d.len() {
        return Err(Error::Mismatch("field and distance lengths differ".into()));
    }
    if let Some(k) = u.values().iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Invariant(format!(
            "lower-bound ratio needs a positive field, got {} at interior node {k}",
            u.values()[k]
        )));
    }
    Ok(u.values()
        .iter()
        .zip(d.values())
        .map(|(a, b)| a / b.powf(exponent))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionCertificate {
    #[serde(skip)]
    pub u: ScalarField,
    pub sigma: f64,
    pub eta: f64,
    pub exponent: f64,
    pub sup_norm: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub halvings: usize,
    pub residual: f64,
}

/// Default `epsilon`: 1 when `f` is unbounded at 0, half the limit otherwise.
pub fn default_epsilon(f: &SingularReaction) -> f64 {
    match f.family {
        ReactionFamily::Singular => 1.0,
        ReactionFamily::Bounded => 0.5 * f.limit_at_zero(),
    }
}

/// Threshold `delta <= 1` with `f(x, t) > epsilon` for `t in (0, delta)`.
pub fn threshold(f: &SingularReaction, epsilon: f64) -> Result<f64> {
    let a_min = f.weight.lower_bound();
    let limit = f.limit_at_zero();
    if !(epsilon > 0.0 && epsilon < limit) {
        return Err(Error::domain(format!(
            "epsilon = {epsilon} must lie in (0, L) with L = {limit}"
        )));
    }
    let root = (f.c1 * a_min / epsilon).powf(1.0 / f.gamma);
    let delta = match f.family {
        ReactionFamily::Singular => root,
        ReactionFamily::Bounded => root - 1.0,
    };
    Ok(delta.min(1.0))
}

/// Halves `sigma` from `epsilon / 2` until `|u_sigma|_inf < delta`
/// (at most 60 times) and certifies `sigma < f(x, u_sigma(x))` at every node.
#[allow(clippy::too_many_arguments)]
pub fn select_sigma(
    f: &SingularReaction,
    e: &ProblemExponents,
    grid: &Grid,
    table_p: Arc<PairWeightTable>,
    table_q: Arc<PairWeightTable>,
    epsilon: Option<f64>,
    opts: &MinimizerOptions,
) -> Result<SubsolutionCertificate> {
    let epsilon = epsilon.unwrap_or_else(|| default_epsilon(f));
    let delta = threshold(f, epsilon)?;
    let mut sigma = 0.5 * epsilon;
    let d = distance_field(grid);
    let dim = grid.dim();
    for halvings in 0..=60 {
        let sol = solve_torsion(sigma, grid, table_p.clone(), table_q.clone(), e.s1, opts)?;
        let sup = sol.u.max_abs();
        if sup < delta {
            for k in 0..grid.interior_count() {
                let x = grid.interior_coords(k);
                let fx = f.weight.eval(&x[..dim]) * f.profile(sol.u.values()[k]);
                if !(sigma < fx) {
                    return Err(Error::Invariant(format!(
                        "sub-solution inequality fails at interior node {k}: sigma = {sigma:.3e}, f = {fx:.3e}"
                    )));
                }
            }
            let exponent = hopf_exponent(e);
            let eta = hopf_ratio(&sol.u, &d, exponent)?;
            log::info!(
                "sub-solution: sigma = {sigma:.4e} after {halvings} halvings, |u|_inf = {sup:.4e}, eta = {eta:.4e}"
            );
            return Ok(SubsolutionCertificate {
                u: sol.u,
                sigma,
                eta,
                exponent,
                sup_norm: sup,
                epsilon,
                delta,
                halvings,
                residual: sol.residual,
            });
        }
        log::debug!("sigma = {sigma:.4e}: |u|_inf = {sup:.4e} >= delta = {delta:.4e}");
        sigma *= 0.5;
    }
    Err(Error::NonConvergence(format!(
        "no sigma below epsilon/2 gave |u_sigma|_inf < {delta:.3e} within 60 halvings"
    )))
}
