//! Line-search minimisation of smooth energies on the interior unknowns.
//!
//! Two modes share the same Armijo backtracking: damped Newton (dense
//! Hessian, shifted Cholesky when indefinite, steepest-descent fallback)
//! and plain gradient descent.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, norm2};

/// Energy with first and (optionally) second derivatives.
#[allow(clippy::len_without_is_empty)]
pub trait Objective: Sync {
    fn len(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Dense row-major Hessian, or `None` when unavailable.
    fn hessian(&self, x: &[f64]) -> Result<Option<Vec<f64>>>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Newton,
    GradientDescent,
}

/// Stopping and line-search parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizerOptions {
    pub method: Method,
    pub max_iterations: usize,
    /// Bound on the scaled gradient norm `|g|_2 / sqrt(n)`.
    pub tolerance: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking factor in (0, 1).
    pub shrink: f64,
    pub initial_step: f64,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        Self {
            method: Method::Newton,
            max_iterations: 5000,
            tolerance: 1e-6,
            armijo: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
        }
    }
}

impl MinimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::config("solver.tolerance", "must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::config("solver.shrink", "must lie in (0, 1)"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::config("solver.armijo", "must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::config("solver.initial_step", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("solver.max_iterations", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// `|g|_2 / sqrt(n)` at `x`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting value first.
    pub trace: Vec<f64>,
}

fn scaled_norm(g: &[f64]) -> f64 {
    norm2(g) / (g.len().max(1) as f64).sqrt()
}

fn finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::Invariant(format!("non-finite {what} at component {k}"))),
        None => Ok(()),
    }
}

/// Solves `H d = -g`, shifting `H` until its Cholesky factor exists.
fn newton_direction(hess: Vec<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let h = DMatrix::from_row_slice(n, n, &hess);
    let diag_scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let rhs = nalgebra::DVector::from_iterator(n, g.iter().map(|v| -v));
    let mut shift = 0.0;
    for _ in 0..40 {
        let mut m = h.clone();
        for i in 0..n {
            m[(i, i)] += shift;
        }
        if let Some(chol) = m.cholesky() {
            let d = chol.solve(&rhs);
            let d: Vec<f64> = d.iter().copied().collect();
            if d.iter().all(|v| v.is_finite()) && dot(&d, g) < 0.0 {
                return Some(d);
            }
        }
        shift = if shift == 0.0 { 1e-10 * diag_scale } else { 10.0 * shift };
    }
    None
}

/// Minimises `obj` from `x0`.
pub fn minimize<O: Objective>(obj: &O, x0: Vec<f64>, opts: &MinimizerOptions) -> Result<MinimizeOutcome> {
    opts.validate()?;
    let n = obj.len();
    if x0.len() != n {
        return Err(Error::Mismatch(format!("start has {} entries, objective {n}", x0.len())));
    }
    let mut x = x0;
    let mut f = obj.value(&x)?;
    let mut g = obj.gradient(&x)?;
    if !f.is_finite() {
        return Err(Error::Invariant("non-finite objective at the start".into()));
    }
    finite(&g, "gradient")?;
    let mut trace = vec![f];
    let mut gd_step = opts.initial_step;
    let mut iterations = 0;
    let mut converged = scaled_norm(&g) < opts.tolerance;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let gnorm = norm2(&g);
        let mut candidates: Vec<(Vec<f64>, f64)> = Vec::with_capacity(2);
        if opts.method == Method::Newton {
            if let Some(h) = obj.hessian(&x)? {
                finite(&h, "Hessian")?;
                if let Some(d) = newton_direction(h, &g) {
                    candidates.push((d, opts.initial_step));
                }
            }
        }
        let steepest: Vec<f64> = g.iter().map(|v| -v).collect();
        let sd_step = if opts.method == Method::Newton {
            opts.initial_step / gnorm.max(f64::MIN_POSITIVE)
        } else {
            gd_step
        };
        candidates.push((steepest, sd_step));

        let mut accepted = None;
        for (d, start) in candidates {
            let slope = dot(&g, &d);
            let mut step = start;
            for _ in 0..80 {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                let ft = obj.value(&trial)?;
                if ft.is_finite() {
                    if ft <= f + opts.armijo * step * slope {
                        accepted = Some((trial, ft, step, None));
                        break;
                    }
                    // below rounding resolution the Armijo test is meaningless;
                    // accept if the gradient improves instead
                    let noise = 64.0 * f64::EPSILON * f.abs().max(ft.abs());
                    if (ft - f).abs() <= noise {
                        let gt = obj.gradient(&trial)?;
                        if norm2(&gt) < gnorm {
                            accepted = Some((trial, ft, step, Some(gt)));
                            break;
                        }
                    }
                }
                step *= opts.shrink;
            }
            if accepted.is_some() {
                break;
            }
        }

        let Some((xn, fnew, step, gnew)) = accepted else {
            log::debug!("line search stalled at iteration {iterations}, |g| = {:.3e}", scaled_norm(&g));
            break;
        };
        let noise = 64.0 * f64::EPSILON * f.abs().max(fnew.abs());
        if fnew > f + noise {
            return Err(Error::Invariant(format!(
                "energy increased from {f:.17e} to {fnew:.17e} on an accepted step"
            )));
        }
        if opts.method == Method::GradientDescent {
            gd_step = (step / opts.shrink).min(1e6 * opts.initial_step);
        }
        x = xn;
        f = fnew;
        g = match gnew {
            Some(gt) => gt,
            None => obj.gradient(&x)?,
        };
        finite(&x, "iterate")?;
        finite(&g, "gradient")?;
        trace.push(f);
        converged = scaled_norm(&g) < opts.tolerance;
    }

    Ok(MinimizeOutcome {
        gradient_norm: scaled_norm(&g),
        x,
        value: f,
        iterations,
        converged,
        trace,
    })
}
