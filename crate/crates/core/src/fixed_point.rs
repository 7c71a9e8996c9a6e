//! Relaxed Picard iteration on `T(v) = u_v`, where `u_v` solves the
//! problem with convection frozen at `D^s v`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frozen::{solve_frozen, uniqueness_probe, FrozenProblem, FrozenSolution, MinimizerOptions, UniquenessProbe};
use crate::gagliardo::{self, load_or_assemble, OperatorParams, PairWeightTable};
use crate::grid::{distance_field, Grid, ScalarField};
use crate::reaction::{check_hypotheses, ConvectiveReaction, HypothesisReport, ProblemExponents, SingularReaction, TruncatedReaction};
use crate::riesz::{riesz_gradient, ConvolutionPlan};
use crate::torsion::{hopf_ratio, select_sigma, SubsolutionCertificate};

/// Outer iteration controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterOptions {
    /// Relaxation weight in (0, 1]; 1 is plain Picard.
    pub theta: f64,
    /// Smallest weight reached by automatic halving.
    pub min_theta: f64,
    /// Bound on the `(s1, p)` seminorm of the step.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Abort when an iterate leaves the empirically invariant ball.
    pub ball_monitor: bool,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            min_theta: 1.0 / 16.0,
            tolerance: 1e-6,
            max_iterations: 200,
            ball_monitor: true,
        }
    }
}

impl OuterOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::config("solver.outer.theta", "must lie in (0, 1]"));
        }
        if !(self.min_theta > 0.0 && self.min_theta <= self.theta) {
            return Err(Error::config("solver.outer.min_theta", "must lie in (0, theta]"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("solver.outer.tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("solver.outer.max_iterations", "must be positive"));
        }
        Ok(())
    }
}

/// Everything needed to apply `T` on one grid.
#[derive(Clone, Debug)]
pub struct Instance {
    pub grid: Grid,
    pub exponents: ProblemExponents,
    pub reaction: SingularReaction,
    pub convection: ConvectiveReaction,
    pub table_p: Arc<PairWeightTable>,
    pub table_q: Arc<PairWeightTable>,
    pub plan: ConvolutionPlan,
    pub certificate: SubsolutionCertificate,
    pub trunc: TruncatedReaction,
    pub distance: ScalarField,
    pub minimizer: MinimizerOptions,
    pub outer: OuterOptions,
    pub hypotheses: HypothesisReport,
}

/// Assembly options for [`Instance::build`].
#[derive(Clone, Debug, Default)]
pub struct BuildOptions {
    pub node_cap: Option<usize>,
    pub padding: Option<usize>,
    pub epsilon: Option<f64>,
    pub cache_dir: Option<std::path::PathBuf>,
}

impl Instance {
    /// Assembles operators and the sub-solution certificate. Hypotheses are
    /// evaluated and recorded, not enforced; see [`crate::config::load_config`].
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        grid: Grid,
        exponents: ProblemExponents,
        reaction: SingularReaction,
        convection: ConvectiveReaction,
        minimizer: MinimizerOptions,
        outer: OuterOptions,
        build: &BuildOptions,
    ) -> Result<Self> {
        minimizer.validate()?;
        outer.validate()?;
        if exponents.dim != grid.dim() {
            return Err(Error::Mismatch("exponent dimension differs from the grid".into()));
        }
        let hypotheses = check_hypotheses(&exponents, &reaction, &convection);
        let cap = build.node_cap.unwrap_or(gagliardo::DEFAULT_NODE_CAP);
        let cache = build.cache_dir.as_deref();
        let table_p = Arc::new(load_or_assemble(&grid, OperatorParams::new(exponents.s1, exponents.p)?, cap, cache)?);
        let table_q = Arc::new(load_or_assemble(&grid, OperatorParams::new(exponents.s2, exponents.q)?, cap, cache)?);
        let plan = ConvolutionPlan::with_padding(&grid, exponents.s, build.padding.unwrap_or(2))?;
        let certificate = select_sigma(
            &reaction,
            &exponents,
            &grid,
            table_p.clone(),
            table_q.clone(),
            build.epsilon,
            &minimizer,
        )?;
        let trunc = TruncatedReaction::new(&grid, reaction.clone(), &certificate.u)?;
        let distance = distance_field(&grid);
        Ok(Self {
            grid,
            exponents,
            reaction,
            convection,
            table_p,
            table_q,
            plan,
            certificate,
            trunc,
            distance,
            minimizer,
            outer,
            hypotheses,
        })
    }

    pub fn floor(&self) -> &ScalarField {
        &self.certificate.u
    }

    /// Frozen problem with convection evaluated at `D^s v`.
    pub fn frozen_problem(&self, v: &ScalarField) -> Result<FrozenProblem> {
        let xi = riesz_gradient(&self.grid, v, &self.plan)?;
        FrozenProblem::new(
            &self.grid,
            self.table_p.clone(),
            self.table_q.clone(),
            self.trunc.clone(),
            &xi,
            &self.convection,
        )
    }
}

/// `T(v)`: the frozen solution for convection at `D^s v`.
pub fn apply_t(v: &ScalarField, inst: &Instance) -> Result<FrozenSolution> {
    let prob = inst.frozen_problem(v)?;
    let sol = solve_frozen(&prob, &inst.minimizer)?;
    if !sol.converged {
        return Err(Error::NonConvergence(format!(
            "frozen solve did not converge (residual {:.3e})",
            sol.residual
        )));
    }
    Ok(sol)
}

/// Scaled residual of the full weak form, convection at `D^s u` itself.
/// The zeroth-order term is `f~(x, u)`, which equals `f(x, u)` wherever
/// `u` lies above the sub-solution.
pub fn verify_solution(u: &ScalarField, inst: &Instance) -> Result<f64> {
    let prob = inst.frozen_problem(u)?;
    crate::frozen::weak_residual(u, &prob)
}

/// `max_k |T(v_k)|^p / (1 + |v_k|^{zeta p'})` and the smallest `rho` with
/// `C (1 + rho^{zeta p'}) <= rho^p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallMonitor {
    pub constant: f64,
    pub radius: f64,
}

/// Smallest `rho > 0` with `c (1 + rho^a) <= rho^p`, for `a < p`.
pub fn invariant_radius(c: f64, a: f64, p: f64) -> f64 {
    let gap = |r: f64| r.powf(p) - c * (1.0 + r.powf(a));
    let mut lo = 0.0;
    let mut hi = c.powf(1.0 / p).max(1e-300);
    while gap(hi) < 0.0 {
        lo = hi;
        hi *= 1.25;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub timestamp: Option<String>,
    pub converged: bool,
    pub iterations: usize,
    pub step_seminorms: Vec<f64>,
    pub frozen_residuals: Vec<f64>,
    pub full_residuals: Vec<f64>,
    pub v_norms: Vec<f64>,
    pub thetas: Vec<f64>,
    pub final_residual: f64,
    pub hopf_ratio: f64,
    pub hopf_exponent: f64,
    /// `min_i (u_i - floor_i)`.
    pub lower_bound_gap: f64,
    pub min_value: f64,
    pub certificate: SubsolutionCertificate,
    pub ball: BallMonitor,
    pub uniqueness: Option<UniquenessProbe>,
    pub hypotheses: HypothesisReport,
    pub warnings: Vec<String>,
    pub u: ScalarField,
}

/// Runs `v_{k+1} = (1 - theta) v_k + theta T(v_k)` from the sub-solution.
pub fn solve_problem(inst: &Instance) -> Result<SolveReport> {
    let opts = inst.outer;
    let e = &inst.exponents;
    let ball_exp = inst.convection.zeta * e.p_conj();
    let mut warnings: Vec<String> = inst.hypotheses.warnings().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    for w in &warnings {
        log::debug!("{w}");
    }
    if inst.grid.domain().has_corners() {
        let msg = "domain has corners; the boundary regularity assumed by the theory fails there".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let mut v = inst.floor().clone();
    let mut theta = opts.theta;
    let mut report_steps = Vec::new();
    let mut frozen_res = Vec::new();
    let mut full_res = Vec::new();
    let mut v_norms = Vec::new();
    let mut thetas = Vec::new();
    let mut ball = BallMonitor::default();
    let mut rising = 0usize;
    let mut last: Option<FrozenSolution> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let v_norm = gagliardo::seminorm(&v, &inst.table_p)?;
        let tv = apply_t(&v, inst)?;
        let tv_norm = gagliardo::seminorm(&tv.u, &inst.table_p)?;

        let ratio = tv_norm.powf(e.p) / (1.0 + v_norm.powf(ball_exp));
        ball.constant = ball.constant.max(ratio);
        ball.radius = invariant_radius(ball.constant, ball_exp, e.p);
        let slack = 1.0 + 1e-9;
        if opts.ball_monitor && (v_norm > ball.radius * slack || tv_norm > ball.radius * slack) {
            return Err(Error::Invariant(format!(
                "iterate left the invariant ball at outer step {iterations}: |v| = {v_norm:.4e}, |T v| = {tv_norm:.4e}, rho = {:.4e}",
                ball.radius
            )));
        }

        let step = tv.u.sub(&v).scaled(theta);
        let step_norm = gagliardo::seminorm(&step, &inst.table_p)?;
        let full = verify_solution(&tv.u, inst)?;
        log::info!(
            "outer {iterations}: step {step_norm:.4e}, frozen residual {:.4e}, full residual {full:.4e}, |v| {v_norm:.4e}, theta {theta}",
            tv.residual
        );
        if let Some(prev) = report_steps.last() {
            rising = if step_norm > *prev { rising + 1 } else { 0 };
        }
        report_steps.push(step_norm);
        frozen_res.push(tv.residual);
        full_res.push(full);
        v_norms.push(v_norm);
        thetas.push(theta);
        v = v.combine(1.0, &step, 1.0);
        last = Some(tv);
        if step_norm < opts.tolerance {
            converged = true;
            break;
        }
        if rising >= 3 && theta > opts.min_theta {
            theta = (0.5 * theta).max(opts.min_theta);
            rising = 0;
            let msg = format!("relaxation halved to {theta} after three rising steps at outer step {iterations}");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let last = last.expect("at least one outer iteration");
    let u = last.u;
    if !converged {
        let msg = format!("outer iteration stopped after {iterations} steps without meeting the tolerance");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let final_residual = verify_solution(&u, inst)?;
    let floor = inst.floor();
    let lower_bound_gap = u.sub(floor).min();
    let min_value = u.min();
    let hopf = if min_value > 0.0 {
        hopf_ratio(&u, &inst.distance, inst.certificate.exponent)?
    } else {
        0.0
    };
    let uniqueness = if inst.hypotheses.uniqueness_applies() {
        let prob = inst.frozen_problem(&u)?;
        uniqueness_probe(&prob, &inst.minimizer, true)?
    } else {
        warnings.push("uniqueness probe skipped: f(t)/t^(q-1) not strictly decreasing".into());
        None
    };
    Ok(SolveReport {
        timestamp: None,
        converged,
        iterations,
        step_seminorms: report_steps,
        frozen_residuals: frozen_res,
        full_residuals: full_res,
        v_norms,
        thetas,
        final_residual,
        hopf_ratio: hopf,
        hopf_exponent: inst.certificate.exponent,
        lower_bound_gap,
        min_value,
        certificate: inst.certificate.clone(),
        ball,
        uniqueness,
        hypotheses: inst.hypotheses.clone(),
        warnings,
        u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_radius_solves_the_balance() {
        let (c, a, p) = (0.7, 1.5 * 1.5, 3.0);
        let rho = invariant_radius(c, a, p);
        assert!((rho.powf(p) - c * (1.0 + rho.powf(a))).abs() < 1e-12 * rho.powf(p));
    }

    #[test]
    fn options_validated() {
        assert!(OuterOptions { theta: 0.0, ..Default::default() }.validate().is_err());
        assert!(OuterOptions::default().validate().is_ok());
    }
}
