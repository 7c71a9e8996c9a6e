//! Small numerical building blocks shared by the kernels and operators:
//! compensated summation and Gauss-Legendre quadrature on intervals,
//! rectangles, and corner-singular rectangles.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

/// Neumaier (improved Kahan) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

type Rule = Arc<[(f64, f64)]>;

/// Gauss-Legendre nodes and weights on [-1, 1], cached per degree.
pub fn gauss_legendre(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let degree = NonZeroUsize::new(n).expect("quadrature degree must be positive");
            let rule = GaussLegendre::new(degree);
            rule.as_node_weight_pairs().iter().copied().collect()
        })
        .clone()
}

/// n-point Gauss-Legendre approximation of the integral of `f` over [a, b].
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> f64 {
    let rule = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = CompensatedSum::new();
    for &(x, w) in rule.iter() {
        acc.add(w * f(mid + half * x));
    }
    half * acc.value()
}

/// Composite rule: `panels` equal panels with `n` points each.
pub fn integrate_composite<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    panels: usize,
    n: usize,
    mut f: F,
) -> f64 {
    let width = (b - a) / panels as f64;
    let mut acc = CompensatedSum::new();
    for k in 0..panels {
        let lo = a + width * k as f64;
        acc.add(integrate(lo, lo + width, n, &mut f));
    }
    acc.value()
}

/// Tensor Gauss-Legendre rule over the rectangle `[x0, x1] x [y0, y1]`,
/// optionally split into `split x split` sub-rectangles.
pub fn integrate_rect<F: FnMut(f64, f64) -> f64>(
    x: [f64; 2],
    y: [f64; 2],
    n: usize,
    split: usize,
    mut f: F,
) -> f64 {
    let rule = gauss_legendre(n);
    let dx = (x[1] - x[0]) / split as f64;
    let dy = (y[1] - y[0]) / split as f64;
    let mut acc = CompensatedSum::new();
    for bx in 0..split {
        let cx = x[0] + dx * (bx as f64 + 0.5);
        for by in 0..split {
            let cy = y[0] + dy * (by as f64 + 0.5);
            for &(u, wu) in rule.iter() {
                let px = cx + 0.5 * dx * u;
                for &(v, wv) in rule.iter() {
                    acc.add(wu * wv * f(px, cy + 0.5 * dy * v));
                }
            }
        }
    }
    0.25 * dx * dy * acc.value()
}

/// Integral over `[0, a] x [0, b]` of an integrand that is singular at the
/// corner (0, 0), in polar coordinates centred at that corner.
///
/// `radial(theta, r_max)` must return the exact radial integral
/// `int_0^{r_max} F(rho cos theta, rho sin theta) rho d rho`; the angular
/// integral is then smooth on the two triangles split by the diagonal.
pub fn integrate_corner_polar<F: FnMut(f64, f64) -> f64>(
    a: f64,
    b: f64,
    n: usize,
    mut radial: F,
) -> f64 {
    let diag = b.atan2(a);
    let lower = integrate(0.0, diag, n, |t| radial(t, a / t.cos()));
    let upper = integrate(diag, std::f64::consts::FRAC_PI_2, n, |t| {
        radial(t, b / t.sin())
    });
    lower + upper
}

/// Radial integral `int_0^R rho^e (c0 + c1 rho + c2 rho^2) d rho` for e > -1.
#[inline]
pub fn radial_poly_integral(e: f64, r: f64, c: [f64; 3]) -> f64 {
    let mut acc = 0.0;
    for (k, ck) in c.iter().enumerate() {
        if *ck != 0.0 {
            let m = e + 1.0 + k as f64;
            acc += ck * r.powf(m) / m;
        }
    }
    acc
}

/// Maximum absolute entry.
pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Euclidean norm.
pub fn norm2(values: &[f64]) -> f64 {
    compensated_sum(values.iter().map(|v| v * v)).sqrt()
}

/// Dot product with compensated accumulation.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}
