//! The problem with frozen convection: for a fixed field `xi = D^s v`,
//! minimise
//!
//! ```text
//! J(u) = Phi_{s1,p}(u) + Phi_{s2,q}(u) - h^N sum_i F~(x_i, u_i) - h^N sum_i g(x_i, xi_i) u_i
//! ```
//!
//! whose critical points are the weak solutions of the truncated problem.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gagliardo::{self, PairWeightTable};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::minimize::{minimize, Objective};
use crate::reaction::{ConvectiveReaction, TruncatedReaction};

pub use crate::minimize::{Method, MinimizerOptions};

/// Zeroth-order term of the frozen problem.
#[derive(Clone, Debug)]
pub enum Source {
    /// `f~(x, u)` with its truncation floor.
    Truncated(TruncatedReaction),
    /// A constant right-hand side `sigma`.
    Constant(f64),
}

#[derive(Clone, Debug)]
pub struct FrozenProblem {
    table_p: Arc<PairWeightTable>,
    table_q: Arc<PairWeightTable>,
    source: Source,
    /// `g(x_i, xi_i)` at every interior node.
    forcing: Vec<f64>,
    cell_volume: f64,
    /// Boundary distance, used to build alternative starting points.
    distance: Vec<f64>,
}

impl FrozenProblem {
    /// Frozen problem with convection `g(x, xi)` evaluated at the given field.
    pub fn new(
        grid: &Grid,
        table_p: Arc<PairWeightTable>,
        table_q: Arc<PairWeightTable>,
        trunc: TruncatedReaction,
        xi: &VectorField,
        convection: &ConvectiveReaction,
    ) -> Result<Self> {
        if xi.len() != grid.interior_count() || xi.dim() != grid.dim() {
            return Err(Error::Mismatch("frozen field does not match the grid".into()));
        }
        let forcing = xi.magnitudes().into_iter().map(|m| convection.eval_norm(m)).collect();
        Self::with_forcing(grid, table_p, table_q, Source::Truncated(trunc), forcing)
    }

    /// Frozen problem with an explicit nodal forcing `g_i`.
    pub fn with_forcing(
        grid: &Grid,
        table_p: Arc<PairWeightTable>,
        table_q: Arc<PairWeightTable>,
        source: Source,
        forcing: Vec<f64>,
    ) -> Result<Self> {
        if !table_p.matches(grid) || !table_q.matches(grid) {
            return Err(Error::Mismatch("pair tables do not match the grid".into()));
        }
        if forcing.len() != grid.interior_count() {
            return Err(Error::Mismatch("forcing length differs from interior count".into()));
        }
        if let Source::Truncated(t) = &source {
            if t.floor().len() != grid.interior_count() {
                return Err(Error::Mismatch("truncation floor does not match the grid".into()));
            }
        }
        Ok(Self {
            table_p,
            table_q,
            source,
            forcing,
            cell_volume: grid.cell_volume(),
            distance: crate::grid::distance_field(grid).into_values(),
        })
    }

    pub fn len(&self) -> usize {
        self.forcing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forcing.is_empty()
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    pub fn tables(&self) -> (&PairWeightTable, &PairWeightTable) {
        (&self.table_p, &self.table_q)
    }

    /// Truncation floor, when the source is truncated.
    pub fn floor(&self) -> Option<&[f64]> {
        match &self.source {
            Source::Truncated(t) => Some(t.floor()),
            Source::Constant(_) => None,
        }
    }

    #[inline]
    fn source_value(&self, k: usize, t: f64) -> f64 {
        match &self.source {
            Source::Truncated(tr) => tr.value(k, t),
            Source::Constant(c) => *c,
        }
    }

    #[inline]
    fn source_primitive(&self, k: usize, t: f64) -> f64 {
        match &self.source {
            Source::Truncated(tr) => tr.primitive(k, t),
            Source::Constant(c) => c * t,
        }
    }

    #[inline]
    fn source_derivative(&self, k: usize, t: f64) -> f64 {
        match &self.source {
            Source::Truncated(tr) => tr.derivative(k, t),
            Source::Constant(_) => 0.0,
        }
    }

    /// Default starting point: the truncation floor, or zero.
    pub fn initial_iterate(&self) -> Vec<f64> {
        match self.floor() {
            Some(f) => f.to_vec(),
            None => vec![0.0; self.len()],
        }
    }
}

/// `J(u)`.
pub fn frozen_energy(u: &ScalarField, prob: &FrozenProblem) -> Result<f64> {
    let ep = gagliardo::energy(u, &prob.table_p)?;
    let eq = gagliardo::energy(u, &prob.table_q)?;
    let lower: crate::numeric::CompensatedSum = u
        .values()
        .iter()
        .enumerate()
        .map(|(k, &t)| prob.source_primitive(k, t) + prob.forcing[k] * t)
        .collect();
    Ok(ep + eq - prob.cell_volume * lower.value())
}

/// Nodal gradient of [`frozen_energy`].
pub fn frozen_gradient(u: &ScalarField, prob: &FrozenProblem) -> Result<Vec<f64>> {
    let gp = gagliardo::operator_gradient(u, &prob.table_p)?;
    let gq = gagliardo::operator_gradient(u, &prob.table_q)?;
    Ok(u.values()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            gp.values()[k] + gq.values()[k]
                - prob.cell_volume * (prob.source_value(k, t) + prob.forcing[k])
        })
        .collect())
}

/// Components `r_i = <A_p u, e_i> + <A_q u, e_i> - h^N f~(x_i, u_i) - h^N g_i`,
/// each computed from the weak form against the nodal indicator.
pub fn residual_vector(u: &ScalarField, prob: &FrozenProblem) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let n = u.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let e = ScalarField::from_values(e);
            let a = gagliardo::apply_form(u, &e, &prob.table_p)?
                + gagliardo::apply_form(u, &e, &prob.table_q)?;
            Ok(a - prob.cell_volume * (prob.source_value(i, u.values()[i]) + prob.forcing[i]))
        })
        .collect()
}

/// Scaled residual `|r|_2 / sqrt(n)`.
pub fn weak_residual(u: &ScalarField, prob: &FrozenProblem) -> Result<f64> {
    let r = residual_vector(u, prob)?;
    Ok(scaled_norm(&r))
}

pub(crate) fn scaled_norm(r: &[f64]) -> f64 {
    crate::numeric::norm2(r) / (r.len().max(1) as f64).sqrt()
}

struct FrozenObjective<'a> {
    prob: &'a FrozenProblem,
}

impl Objective for FrozenObjective<'_> {
    fn len(&self) -> usize {
        self.prob.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        frozen_energy(&ScalarField::from_values(x.to_vec()), self.prob)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        frozen_gradient(&ScalarField::from_values(x.to_vec()), self.prob)
    }

    fn hessian(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        let (p, q) = (self.prob.table_p.params().p(), self.prob.table_q.params().p());
        if p < 2.0 || q < 2.0 {
            return Ok(None);
        }
        let u = ScalarField::from_values(x.to_vec());
        let mut h = gagliardo::operator_hessian(&u, &self.prob.table_p)?;
        let hq = gagliardo::operator_hessian(&u, &self.prob.table_q)?;
        for (a, b) in h.iter_mut().zip(&hq) {
            *a += b;
        }
        let n = x.len();
        for (k, &t) in x.iter().enumerate() {
            h[k * n + k] -= self.prob.cell_volume * self.prob.source_derivative(k, t);
        }
        Ok(Some(h))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenSolution {
    pub u: ScalarField,
    pub converged: bool,
    pub iterations: usize,
    /// Weak residual recomputed at `u`.
    pub residual: f64,
    /// `min_i (u_i - floor_i)`, when a floor exists.
    pub lower_bound_gap: Option<f64>,
    pub energy_trace: Vec<f64>,
}

/// Minimises the frozen energy from the truncation floor.
pub fn solve_frozen(prob: &FrozenProblem, opts: &MinimizerOptions) -> Result<FrozenSolution> {
    solve_frozen_from(prob, prob.initial_iterate(), opts)
}

/// Minimises the frozen energy from `start`.
pub fn solve_frozen_from(
    prob: &FrozenProblem,
    start: Vec<f64>,
    opts: &MinimizerOptions,
) -> Result<FrozenSolution> {
    let out = minimize(&FrozenObjective { prob }, start, opts)?;
    let u = ScalarField::from_values(out.x);
    let residual = weak_residual(&u, prob)?;
    let lower_bound_gap = prob.floor().map(|f| {
        u.values()
            .iter()
            .zip(f)
            .map(|(a, b)| a - b)
            .fold(f64::INFINITY, f64::min)
    });
    if !out.converged {
        log::warn!(
            "frozen solve stopped after {} iterations with residual {residual:.3e}",
            out.iterations
        );
    }
    Ok(FrozenSolution {
        u,
        converged: out.converged,
        iterations: out.iterations,
        residual,
        lower_bound_gap,
        energy_trace: out.trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessProbe {
    /// `|u1 - u2|_inf` between the two solves.
    pub discrepancy: f64,
    /// Both solves converged.
    pub conclusive: bool,
}

/// Solves from the floor and from `10 * floor + bump` and compares.
/// Returns `None` (with a warning) when the uniqueness condition fails.
pub fn uniqueness_probe(
    prob: &FrozenProblem,
    opts: &MinimizerOptions,
    uniqueness_applies: bool,
) -> Result<Option<UniquenessProbe>> {
    if !uniqueness_applies {
        log::warn!("uniqueness probe skipped: f(t)/t^(q-1) is not strictly decreasing");
        return Ok(None);
    }
    let first = prob.initial_iterate();
    let sup = first.iter().copied().fold(0.0, f64::max).max(1e-3);
    let dmax = prob.distance.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let second: Vec<f64> = first
        .iter()
        .zip(&prob.distance)
        .map(|(u, d)| 10.0 * u + sup * (std::f64::consts::PI * d / (2.0 * dmax)).sin())
        .collect();
    probe_from(prob, opts, first, second).map(Some)
}

/// Probe with explicit starting points.
pub fn probe_from(
    prob: &FrozenProblem,
    opts: &MinimizerOptions,
    a: Vec<f64>,
    b: Vec<f64>,
) -> Result<UniquenessProbe> {
    let s1 = solve_frozen_from(prob, a, opts)?;
    let s2 = solve_frozen_from(prob, b, opts)?;
    let discrepancy = s1.u.sub(&s2.u).max_abs();
    Ok(UniquenessProbe {
        discrepancy,
        conclusive: s1.converged && s2.converged,
    })
}
