//! Quadrature of the Gagliardo kernel on grid cells.
//!
//! Pair weights depend only on the lattice offset `k` between two nodes.
//! For `k != 0` the weight is
//! `W(k) = |k h|^{-p} int_{C_0} int_{C_k} |x - y|^{p - N - sp} dx dy`,
//! which is finite for touching cells whatever the value of `sp`, and makes
//! the pair sum exact for affine data in one dimension. The self-cell
//! contribution `int_{C_0} int_{C_0} |z_d|^p |z|^{-N-sp}` of an affine
//! function is folded into the unit offsets along each axis.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::numeric::{integrate, integrate_corner_polar, integrate_rect, radial_poly_integral, CompensatedSum};

/// Closed-form second differences are used up to this offset; beyond it a
/// Gauss rule on the tent avoids cancellation.
const CLOSED_FORM_OFFSETS: usize = 16;

/// `int_{-1}^{1} (1 - |v|) |k + v|^beta dv` for integer `k >= 0`.
pub(crate) fn tent_moment_1d(k: usize, beta: f64) -> f64 {
    let e = beta + 2.0;
    let phi = |z: f64| z.powf(e) / ((beta + 1.0) * e);
    if k == 0 {
        2.0 * phi(1.0)
    } else if k <= CLOSED_FORM_OFFSETS {
        let kf = k as f64;
        phi(kf + 1.0) - 2.0 * phi(kf) + phi(kf - 1.0)
    } else {
        let kf = k as f64;
        integrate(-1.0, 0.0, 8, |v| (1.0 + v) * (kf + v).powf(beta))
            + integrate(0.0, 1.0, 8, |v| (1.0 - v) * (kf + v).powf(beta))
    }
}

/// Stencil `W(k)`, `k = 0..len`, in one dimension, self-cell correction
/// included; `W(0)` is 0 and never used.
pub(crate) fn stencil_1d(h: f64, s: f64, p: f64, len: usize) -> Vec<f64> {
    let beta = p - 1.0 - s * p;
    let scale = h.powf(beta + 2.0);
    let mut w: Vec<f64> = (0..len)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                scale * tent_moment_1d(k, beta) / (k as f64 * h).powf(p)
            }
        })
        .collect();
    if len > 1 {
        let self_cell = scale * tent_moment_1d(0, beta);
        w[1] += 0.5 * self_cell / h.powf(p);
    }
    w
}

/// Bilinear coefficients `[c00, c10, c01, c11]` in local corner coordinates
/// from the values at `(0,0), (a,0), (0,b), (a,b)`.
fn bilinear(v: [f64; 4], a: f64, b: f64) -> [f64; 4] {
    [
        v[0],
        (v[1] - v[0]) / a,
        (v[2] - v[0]) / b,
        (v[3] - v[1] - v[2] + v[0]) / (a * b),
    ]
}

/// Integral over the corner rectangle `[0,a] x [0,b]` of
/// `(c00 + c10 x + c01 y + c11 x y) |z|^beta * ang(theta)`.
fn corner_integral<G: Fn(f64) -> f64>(c: [f64; 4], a: f64, b: f64, beta: f64, ang: G) -> f64 {
    integrate_corner_polar(a, b, 24, |t, r| {
        let (sn, cs) = t.sin_cos();
        let coeffs = [c[0], c[1] * cs + c[2] * sn, c[3] * cs * sn];
        ang(t) * radial_poly_integral(beta + 1.0, r, coeffs)
    })
}

/// `int_{C_0} int_{C_k} |x - y|^beta dx dy` in two dimensions, written as
/// `int Lambda(w) |k h + w|^beta dw` over `[-h1,h1] x [-h2,h2]`.
pub(crate) fn tent_moment_2d(k: [i64; 2], h: [f64; 2], beta: f64) -> f64 {
    let tent = |w1: f64, w2: f64| (h[0] - w1.abs()).max(0.0) * (h[1] - w2.abs()).max(0.0);
    let shift = [k[0] as f64 * h[0], k[1] as f64 * h[1]];
    let mut acc = CompensatedSum::new();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            // quadrant of w, then the rectangle it covers in z = kh + w
            let wx = if sx < 0.0 { [-h[0], 0.0] } else { [0.0, h[0]] };
            let wy = if sy < 0.0 { [-h[1], 0.0] } else { [0.0, h[1]] };
            let zx = [shift[0] + wx[0], shift[0] + wx[1]];
            let zy = [shift[1] + wy[0], shift[1] + wy[1]];
            let corner_x = zx[0] == 0.0 || zx[1] == 0.0;
            let corner_y = zy[0] == 0.0 || zy[1] == 0.0;
            let touches = (zx[0] <= 0.0 && zx[1] >= 0.0) && (zy[0] <= 0.0 && zy[1] >= 0.0);
            if touches && corner_x && corner_y {
                // local coordinates (a, b) = (|z1|, |z2|) from the singular corner
                let dx = if zx[1] == 0.0 { -1.0 } else { 1.0 };
                let dy = if zy[1] == 0.0 { -1.0 } else { 1.0 };
                let lam = |a: f64, b: f64| tent(dx * a - shift[0], dy * b - shift[1]);
                let c = bilinear(
                    [lam(0.0, 0.0), lam(h[0], 0.0), lam(0.0, h[1]), lam(h[0], h[1])],
                    h[0],
                    h[1],
                );
                acc.add(corner_integral(c, h[0], h[1], beta, |_| 1.0));
            } else {
                let dist = rect_distance(zx, zy);
                let size = h[0].max(h[1]);
                let (n, split) = if dist < 1.5 * size {
                    (16, 3)
                } else if dist < 6.0 * size {
                    (12, 1)
                } else {
                    (8, 1)
                };
                acc.add(integrate_rect(zx, zy, n, split, |z1, z2| {
                    tent(z1 - shift[0], z2 - shift[1]) * (z1 * z1 + z2 * z2).powf(0.5 * beta)
                }));
            }
        }
    }
    acc.value()
}

fn rect_distance(x: [f64; 2], y: [f64; 2]) -> f64 {
    let gap = |r: [f64; 2]| {
        if r[0] > 0.0 {
            r[0]
        } else if r[1] < 0.0 {
            -r[1]
        } else {
            0.0
        }
    };
    gap(x).hypot(gap(y))
}

/// `int_{C_0} int_{C_0} |z_d|^p |z|^{-2-sp}` for axis `d` in two dimensions.
pub(crate) fn self_cell_2d(h: [f64; 2], s: f64, p: f64, axis: usize) -> f64 {
    let beta = p - 2.0 - s * p;
    let c = bilinear([h[0] * h[1], 0.0, 0.0, 0.0], h[0], h[1]);
    let one = corner_integral(c, h[0], h[1], beta, |t| {
        if axis == 0 {
            t.cos().abs().powf(p)
        } else {
            t.sin().abs().powf(p)
        }
    });
    4.0 * one
}

/// Stencil indexed by `|dx| + shape[0] * |dy|` in two dimensions.
pub(crate) fn stencil_2d(h: [f64; 2], s: f64, p: f64, shape: [usize; 2]) -> Vec<f64> {
    let beta = p - 2.0 - s * p;
    let mut w: Vec<f64> = (0..shape[0] * shape[1])
        .into_par_iter()
        .map(|idx| {
            let k = [(idx % shape[0]) as i64, (idx / shape[0]) as i64];
            if k == [0, 0] {
                return 0.0;
            }
            let len = (k[0] as f64 * h[0]).hypot(k[1] as f64 * h[1]);
            tent_moment_2d(k, h, beta) / len.powf(p)
        })
        .collect();
    if shape[0] > 1 {
        w[1] += 0.5 * self_cell_2d(h, s, p, 0) / h[0].powf(p);
    }
    if shape[1] > 1 {
        w[shape[0]] += 0.5 * self_cell_2d(h, s, p, 1) / h[1].powf(p);
    }
    w
}

/// `int_{C} int_{y outside [lo, hi]} |x - y|^{-1-sp}` for the cell `C = [c0, c1]`.
pub(crate) fn tail_1d(cell: [f64; 2], lo: f64, hi: f64, sp: f64) -> f64 {
    integrate(cell[0], cell[1], 8, |x| ((x - lo).powf(-sp) + (hi - x).powf(-sp)) / sp)
}

/// Distance from `x` to the boundary of the box along direction `theta`.
fn exit_distance(x: [f64; 2], lo: [f64; 2], hi: [f64; 2], theta: f64) -> f64 {
    let (sn, cs) = theta.sin_cos();
    let mut t = f64::INFINITY;
    if cs > 0.0 {
        t = t.min((hi[0] - x[0]) / cs);
    } else if cs < 0.0 {
        t = t.min((lo[0] - x[0]) / cs);
    }
    if sn > 0.0 {
        t = t.min((hi[1] - x[1]) / sn);
    } else if sn < 0.0 {
        t = t.min((lo[1] - x[1]) / sn);
    }
    t
}

/// `(1/sp) int_0^{2 pi} rho(x, theta)^{-sp} d theta`: the kernel mass
/// outside the box seen from `x`.
fn tail_density_2d(x: [f64; 2], lo: [f64; 2], hi: [f64; 2], sp: f64) -> f64 {
    let mut cuts: Vec<f64> = [
        (lo[1] - x[1]).atan2(lo[0] - x[0]),
        (lo[1] - x[1]).atan2(hi[0] - x[0]),
        (hi[1] - x[1]).atan2(hi[0] - x[0]),
        (hi[1] - x[1]).atan2(lo[0] - x[0]),
    ]
    .iter()
    .map(|a| a.rem_euclid(4.0 * FRAC_PI_2))
    .collect();
    cuts.sort_by(f64::total_cmp);
    let mut acc = CompensatedSum::new();
    for seg in 0..4 {
        let a = cuts[seg];
        let b = if seg == 3 { cuts[0] + 4.0 * FRAC_PI_2 } else { cuts[seg + 1] };
        acc.add(integrate(a, b, 16, |t| exit_distance(x, lo, hi, t).powf(-sp)));
    }
    acc.value() / sp
}

/// `int_{C} int_{y outside box} |x - y|^{-2-sp}` for the cell `C`.
pub(crate) fn tail_2d(cx: [f64; 2], cy: [f64; 2], lo: [f64; 2], hi: [f64; 2], sp: f64) -> f64 {
    integrate_rect(cx, cy, 4, 1, |x1, x2| tail_density_2d([x1, x2], lo, hi, sp))
}
