//! Reaction terms `f(x, t)` and `g(x, xi)`, the truncation of `f` below a
//! sub-solution, and the parameter windows under which the solver runs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Orders and exponents of the (p,q)-Laplacian problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemExponents {
    pub dim: usize,
    /// Order of the fractional gradient in the convection.
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
    pub p: f64,
    pub q: f64,
}

impl ProblemExponents {
    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn q_conj(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    /// Whether `q' s2 = s1` up to rounding.
    pub fn critical_pairing(&self) -> bool {
        (self.q_conj() * self.s2 - self.s1).abs() <= 1e-12 * self.s1.abs().max(1.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionFamily {
    /// `c1 t^{-gamma} + c2 t^r`, unbounded at `t = 0`.
    #[default]
    Singular,
    /// `c1 (1 + t)^{-gamma} + c2 t^r`, tending to `c1` at `t = 0`.
    Bounded,
}

/// Multiplicative spatial weight `a(x)` on `f`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Weight {
    #[default]
    Uniform,
    /// `1 + amplitude * exp(-|x - center|^2 / width^2)`.
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
}

impl Weight {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Weight::Uniform => 1.0,
            Weight::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                1.0 + amplitude * (-r2 / (width * width)).exp()
            }
        }
    }

    /// Infimum of `a` over the plane.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Weight::Uniform => 1.0,
            Weight::Gaussian { amplitude, .. } => 1.0 + amplitude.min(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Weight::Uniform => Ok(()),
            Weight::Gaussian { amplitude, width, .. } => {
                if !(amplitude.is_finite() && *amplitude > -1.0) {
                    Err(Error::config("f.weight.amplitude", "must exceed -1 so that a(x) > 0"))
                } else if !(width.is_finite() && *width > 0.0) {
                    Err(Error::config("f.weight.width", "must be positive"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// `f(x, t) = a(x) (c1 t^{-gamma} + c2 t^r)` or its bounded variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularReaction {
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub r: f64,
    #[serde(default)]
    pub family: ReactionFamily,
    #[serde(default)]
    pub weight: Weight,
}

impl SingularReaction {
    /// `t`-profile without the weight, `t > 0`.
    pub fn profile(&self, t: f64) -> f64 {
        match self.family {
            ReactionFamily::Singular => self.c1 * t.powf(-self.gamma) + self.c2 * t.powf(self.r),
            ReactionFamily::Bounded => {
                self.c1 * (1.0 + t).powf(-self.gamma) + self.c2 * t.powf(self.r)
            }
        }
    }

    /// Derivative of [`profile`](Self::profile) in `t`.
    pub fn profile_derivative(&self, t: f64) -> f64 {
        let growth = self.r * self.c2 * t.powf(self.r - 1.0);
        match self.family {
            ReactionFamily::Singular => -self.gamma * self.c1 * t.powf(-self.gamma - 1.0) + growth,
            ReactionFamily::Bounded => {
                -self.gamma * self.c1 * (1.0 + t).powf(-self.gamma - 1.0) + growth
            }
        }
    }

    /// `int_0^t profile`, `t >= 0`.
    pub fn profile_antiderivative(&self, t: f64) -> f64 {
        let g = 1.0 - self.gamma;
        let growth = self.c2 * t.powf(self.r + 1.0) / (self.r + 1.0);
        match self.family {
            ReactionFamily::Singular => self.c1 * t.powf(g) / g + growth,
            ReactionFamily::Bounded => self.c1 * (g * t.ln_1p()).exp_m1() / g + growth,
        }
    }

    /// `lim inf_{t -> 0+} f`: infinite for the singular family.
    pub fn limit_at_zero(&self) -> f64 {
        match self.family {
            ReactionFamily::Singular => f64::INFINITY,
            ReactionFamily::Bounded => self.c1 * self.weight.lower_bound(),
        }
    }
}

/// `f(x, t)`; `t` must be positive.
pub fn f_eval(reaction: &SingularReaction, x: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("f(x, t) needs t > 0, got {t}")));
    }
    Ok(reaction.weight.eval(x) * reaction.profile(t))
}

/// Convection `g(x, xi) = c3 (1 + |xi|^zeta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvectiveReaction {
    pub c3: f64,
    pub zeta: f64,
}

impl ConvectiveReaction {
    pub fn eval_norm(&self, xi_norm: f64) -> f64 {
        self.c3 * (1.0 + xi_norm.powf(self.zeta))
    }
}

pub fn g_eval(reaction: &ConvectiveReaction, _x: &[f64], xi: &[f64]) -> f64 {
    reaction.eval_norm(xi.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// `f~(x, t) = f(x, max(u(x), t))` at the interior nodes for a positive
/// floor `u`.
#[derive(Clone, Debug)]
pub struct TruncatedReaction {
    base: SingularReaction,
    floor: Vec<f64>,
    weight: Vec<f64>,
    floor_value: Vec<f64>,
    floor_primitive: Vec<f64>,
}

impl TruncatedReaction {
    pub fn new(grid: &Grid, base: SingularReaction, floor: &ScalarField) -> Result<Self> {
        floor.check_grid(grid)?;
        if let Some(k) = floor.values().iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Invariant(format!(
                "truncation floor must be positive, got {} at interior node {k}",
                floor.values()[k]
            )));
        }
        let dim = grid.dim();
        let weight: Vec<f64> = (0..grid.interior_count())
            .map(|k| base.weight.eval(&grid.interior_coords(k)[..dim]))
            .collect();
        let floor = floor.values().to_vec();
        let floor_value = floor.iter().map(|&u| base.profile(u)).collect();
        let floor_primitive = floor.iter().map(|&u| base.profile_antiderivative(u)).collect();
        Ok(Self {
            base,
            floor,
            weight,
            floor_value,
            floor_primitive,
        })
    }

    pub fn base(&self) -> &SingularReaction {
        &self.base
    }

    pub fn floor(&self) -> &[f64] {
        &self.floor
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weight[k]
    }

    /// `f~` at interior node `k`.
    #[inline]
    pub fn value(&self, k: usize, t: f64) -> f64 {
        if t <= self.floor[k] {
            self.weight[k] * self.floor_value[k]
        } else {
            self.weight[k] * self.base.profile(t)
        }
    }

    /// `F~(x_k, tau) = int_0^tau f~(x_k, t) dt`.
    #[inline]
    pub fn primitive(&self, k: usize, tau: f64) -> f64 {
        let u = self.floor[k];
        if tau <= u {
            self.weight[k] * self.floor_value[k] * tau
        } else {
            let above = self.base.profile_antiderivative(tau) - self.floor_primitive[k];
            self.weight[k] * (self.floor_value[k] * u + above)
        }
    }

    /// Right derivative of `f~` in `t`.
    #[inline]
    pub fn derivative(&self, k: usize, t: f64) -> f64 {
        if t < self.floor[k] {
            0.0
        } else {
            self.weight[k] * self.base.profile_derivative(t)
        }
    }
}

pub fn f_truncated(trunc: &TruncatedReaction, k: usize, t: f64) -> f64 {
    trunc.value(k, t)
}

#[allow(non_snake_case)]
pub fn F_truncated(trunc: &TruncatedReaction, k: usize, tau: f64) -> f64 {
    trunc.primitive(k, tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Failure blocks a solve.
    Required,
    /// Failure is reported and disables dependent checks.
    Advisory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub holds: bool,
    pub severity: Severity,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

/// Name of the monotonicity condition on `f(t)/t^{q-1}`.
pub const HF2: &str = "f(t)/t^(q-1) strictly decreasing";

impl HypothesisReport {
    fn push(&mut self, name: &str, holds: bool, severity: Severity, detail: String) {
        self.checks.push(HypothesisCheck {
            name: name.to_string(),
            holds,
            severity,
            detail,
        });
    }

    /// All required checks hold.
    pub fn passed(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.holds || c.severity == Severity::Advisory)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks
            .iter()
            .filter(|c| !c.holds && c.severity == Severity::Required)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks
            .iter()
            .filter(|c| !c.holds && c.severity == Severity::Advisory)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Whether the uniqueness condition holds.
    pub fn uniqueness_applies(&self) -> bool {
        self.get(HF2).is_some_and(|c| c.holds)
    }

    /// First required failure as an error.
    pub fn into_result(self) -> Result<Self> {
        let failure = self
            .failures()
            .next()
            .map(|c| (c.name.clone(), c.detail.clone()));
        match failure {
            Some((name, detail)) => Err(Error::Hypothesis { name, detail }),
            None => Ok(self),
        }
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match (c.holds, c.severity) {
                (true, _) => "ok",
                (false, Severity::Required) => "FAIL",
                (false, Severity::Advisory) => "warn",
            };
            writeln!(f, "[{tag:>4}] {}: {}", c.name, c.detail)?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Strict decrease of `f(t)/t^{q-1}` sampled on 200 log-spaced points.
pub fn sampled_quotient_decreasing(reaction: &SingularReaction, q: f64) -> bool {
    let n = 200;
    let (lo, hi) = (-4.0f64, 4.0f64);
    let quotient = |t: f64| reaction.profile(t) / t.powf(q - 1.0);
    let mut prev = f64::INFINITY;
    for i in 0..n {
        let t = 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64);
        let v = quotient(t);
        if !(v < prev) {
            return false;
        }
        prev = v;
    }
    true
}

/// Evaluates every standing assumption on the parameters.
pub fn check_hypotheses(
    e: &ProblemExponents,
    f: &SingularReaction,
    g: &ConvectiveReaction,
) -> HypothesisReport {
    use Severity::*;
    let mut rep = HypothesisReport::default();
    let n = e.dim as f64;

    rep.push(
        "0<s2<=s<=s1<=1",
        0.0 < e.s2 && e.s2 <= e.s && e.s <= e.s1 && e.s1 <= 1.0,
        Required,
        format!("s2 = {}, s = {}, s1 = {}", e.s2, e.s, e.s1),
    );
    rep.push(
        "s1<1",
        e.s1 < 1.0,
        Required,
        format!("s1 = {} (the nonlocal operators need s1 < 1)", e.s1),
    );
    let bound = n / e.s1;
    if e.dim >= 2 {
        rep.push(
            "2<q<p<N/s1",
            2.0 < e.q && e.q < e.p && e.p < bound,
            Required,
            format!("q = {}, p = {}, N/s1 = {bound:.6}", e.q, e.p),
        );
    } else {
        rep.push(
            "2<q<p<N/s1",
            2.0 < e.q && e.q < e.p,
            Required,
            format!("q = {}, p = {}; N/s1 bound waived for N = 1", e.q, e.p),
        );
        rep.push(
            "p<N/s1",
            e.p < bound,
            Advisory,
            format!("p = {}, N/s1 = {bound:.6}; incompatible with s1*p > 1 when N = 1", e.p),
        );
    }
    rep.push(
        "s1*p>1",
        e.s1 * e.p > 1.0,
        Required,
        format!("s1*p = {:.6}", e.s1 * e.p),
    );
    rep.push(
        "0<gamma<1",
        0.0 < f.gamma && f.gamma < 1.0,
        Required,
        format!("gamma = {}", f.gamma),
    );
    rep.push(
        "c1,c2>0",
        f.c1 > 0.0 && f.c2 > 0.0,
        Required,
        format!("c1 = {}, c2 = {}", f.c1, f.c2),
    );
    rep.push(
        "1<r<p-1",
        1.0 < f.r && f.r < e.p - 1.0,
        Required,
        format!("r = {}, p-1 = {}", f.r, e.p - 1.0),
    );
    rep.push(
        "a(x)>0",
        f.weight.validate().is_ok() && f.weight.lower_bound() > 0.0,
        Required,
        format!("weight {:?}", f.weight),
    );
    rep.push(
        "1<zeta<p-1",
        1.0 < g.zeta && g.zeta < e.p - 1.0,
        Required,
        format!("zeta = {}, p-1 = {}", g.zeta, e.p - 1.0),
    );
    rep.push(
        "c3>=0",
        g.c3 >= 0.0,
        Required,
        format!("c3 = {}", g.c3),
    );
    if g.c3 == 0.0 {
        rep.push(
            "c3>0",
            false,
            Advisory,
            "c3 = 0 removes the convection; the fixed-point map is constant".into(),
        );
    }
    let pairing = e.q_conj() * e.s2;
    rep.push(
        "q's2!=s1",
        !e.critical_pairing(),
        Required,
        format!("q's2 = {pairing:.6}, s1 = {} (q's2 != s1 < 1/(p'gamma))", e.s1),
    );
    let cap = 1.0 / (e.p_conj() * f.gamma);
    rep.push(
        "s1<1/(p'gamma)",
        e.s1 < cap,
        Required,
        format!("s1 = {}, 1/(p'gamma) = {cap:.6} (q's2 != s1 < 1/(p'gamma))", e.s1),
    );
    let analytic = f.r < e.q - 1.0;
    let sampled = sampled_quotient_decreasing(f, e.q);
    rep.push(
        HF2,
        analytic && sampled,
        Advisory,
        format!(
            "r = {} against q-1 = {} (strict r < q-1 needed), sampled decrease: {sampled}; uniqueness checks are skipped when this fails",
            f.r,
            e.q - 1.0
        ),
    );
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_f() -> SingularReaction {
        SingularReaction {
            gamma: 0.5,
            c1: 1.0,
            c2: 1.0,
            r: 1.5,
            family: ReactionFamily::Singular,
            weight: Weight::Uniform,
        }
    }

    #[test]
    fn f_sample_values() {
        let f = default_f();
        assert_eq!(f_eval(&f, &[0.0], 1.0).unwrap(), 2.0);
        assert!((f_eval(&f, &[0.0], 4.0).unwrap() - 8.5).abs() < 1e-14);
        assert!(f_eval(&f, &[0.0], 0.0).is_err());
    }

    #[test]
    fn g_sample_values() {
        let g = ConvectiveReaction { c3: 0.1, zeta: 1.5 };
        assert_eq!(g_eval(&g, &[0.0], &[0.0, 0.0]), 0.1);
        assert!((g_eval(&g, &[0.0], &[0.0, 4.0]) - 0.9).abs() < 1e-15);
        assert_eq!(g_eval(&g, &[0.0], &[3.0, 4.0]), g_eval(&g, &[0.0], &[5.0, 0.0]));
    }

    #[test]
    fn bounded_primitive_matches_quadrature() {
        let f = SingularReaction {
            family: ReactionFamily::Bounded,
            ..default_f()
        };
        let exact = f.profile_antiderivative(2.0);
        let quad = crate::numeric::integrate(0.0, 2f64.sqrt(), 32, |w| 2.0 * w * f.profile(w * w));
        assert!((exact - quad).abs() < 1e-12);
        assert_eq!(f.limit_at_zero(), 1.0);
    }

    #[test]
    fn reference_parameter_set_passes() {
        let e = ProblemExponents { dim: 4, s: 0.7, s1: 0.9, s2: 0.6, p: 3.4, q: 2.5 };
        let f = SingularReaction { gamma: 0.3, r: 1.2, ..default_f() };
        let g = ConvectiveReaction { c3: 0.1, zeta: 1.5 };
        let rep = check_hypotheses(&e, &f, &g);
        assert!(rep.passed(), "{rep}");
        assert!(rep.uniqueness_applies());
    }

    #[test]
    fn boundary_growth_exponent_flags_uniqueness() {
        let e = ProblemExponents { dim: 2, s: 0.55, s1: 0.6, s2: 0.5, p: 3.0, q: 2.5 };
        let f = SingularReaction { gamma: 0.3, r: 1.5, ..default_f() };
        let g = ConvectiveReaction { c3: 0.1, zeta: 1.5 };
        let rep = check_hypotheses(&e, &f, &g);
        assert!(rep.passed());
        assert!(!rep.uniqueness_applies());
    }
}
