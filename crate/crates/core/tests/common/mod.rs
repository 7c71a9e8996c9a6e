//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `Gamma((N - alpha)/2) / (pi^{N/2} 2^alpha Gamma(alpha/2))`.
pub fn riesz_constant(n: usize, alpha: f64) -> f64 {
    let nf = n as f64;
    (ln_gamma(0.5 * (nf - alpha)) - ln_gamma(0.5 * alpha)).exp() / (PI.powf(0.5 * nf) * 2f64.powf(alpha))
}

/// Double-exponential quadrature on `[a, b]`. Integrable singularities are
/// resolved to full precision only at `a`, where abscissae are formed as
/// `a + offset` without cancellation.
pub fn tanh_sinh<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let half = 0.5 * (b - a);
    let eval = |t: f64| {
        let u = 0.5 * PI * t.sinh();
        let w = half * 0.5 * PI * t.cosh() / u.cosh().powi(2);
        // offsets from the nearer endpoint, computed without cancellation
        let x = if t < 0.0 { a + half * u.exp() / u.cosh() } else { b - half * (-u).exp() / u.cosh() };
        if x <= a || x >= b || w == 0.0 || !w.is_finite() {
            0.0
        } else {
            w * f(x)
        }
    };
    let mut h = 0.5;
    let mut total = eval(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > 6.0 {
            break;
        }
        total += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = h * total;
    for _ in 0..8 {
        h *= 0.5;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > 6.0 {
                break;
            }
            total += eval(t) + eval(-t);
            k += 2;
        }
        let next = h * total;
        if (next - estimate).abs() <= 1e-14 * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Modified Bessel function `K_nu(x)` from `int_0^inf exp(-x cosh t) cosh(nu t) dt`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let step = 1e-3;
    let mut sum = 0.5 * (-x).exp();
    let mut t: f64 = step;
    loop {
        let e = x * t.cosh();
        if e > 745.0 {
            break;
        }
        sum += (-e).exp() * (nu * t).cosh();
        t += step;
    }
    step * sum
}

/// Bessel potential kernel from its closed form in terms of `K`.
pub fn bessel_kernel(n: usize, alpha: f64, r: f64) -> f64 {
    let nf = n as f64;
    let pre = 2f64.powf(1.0 - 0.5 * (nf + alpha)) * PI.powf(-0.5 * nf) / ln_gamma(0.5 * alpha).exp();
    pre * r.powf(0.5 * (alpha - nf)) * bessel_k(0.5 * (nf - alpha), r)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
