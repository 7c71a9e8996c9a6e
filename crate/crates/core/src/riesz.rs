//! Riesz potential `I_{1-s} * u` and fractional gradient
//! `D^s u = grad(I_{1-s} * u)` on a grid, by zero-padded FFT convolution.
//!
//! The kernel is integrated over each grid cell, so the singular origin
//! cell carries its exact mass. Padding is at least `2n - 1` per axis,
//! which makes the discrete convolution linear (no wrap-around).

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::kernels::{riesz_cell_integral, RieszParams};

/// Precomputed kernel spectrum for one grid and order `s`.
#[derive(Clone)]
pub struct ConvolutionPlan {
    s: f64,
    dim: usize,
    shape: [usize; 2],
    spacing: [f64; 2],
    padded: [usize; 2],
    spectrum: Vec<Complex64>,
    forward: [Arc<dyn Fft<f64>>; 2],
    inverse: [Arc<dyn Fft<f64>>; 2],
}

impl std::fmt::Debug for ConvolutionPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvolutionPlan")
            .field("s", &self.s)
            .field("shape", &self.shape)
            .field("padded", &self.padded)
            .finish()
    }
}

/// Potential values at every node of the grid's box.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxPotential {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

impl BoxPotential {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix + self.shape[0] * iy]
    }
}

impl ConvolutionPlan {
    /// Plan with the default padding factor 2.
    pub fn new(grid: &Grid, s: f64) -> Result<Self> {
        Self::with_padding(grid, s, 2)
    }

    /// Plan padding every axis to `max(factor * n, 2n - 1)` points.
    pub fn with_padding(grid: &Grid, s: f64, factor: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain(format!("gradient order s = {s} outside (0, 1)")));
        }
        let dim = grid.dim();
        let params = RieszParams::new(dim, 1.0 - s)?;
        let shape = grid.shape();
        let h = grid.spacing();
        let mut padded = [1usize; 2];
        for d in 0..dim {
            padded[d] = (factor.max(1) * shape[d]).max(2 * shape[d] - 1);
        }

        // cell integrals of the kernel at every offset, wrapped into the padded box
        let total = padded[0] * padded[1];
        let reach = [shape[0] as i64 - 1, shape[1] as i64 - 1];
        let offsets: Vec<(i64, i64)> = (-reach[1]..=reach[1])
            .flat_map(|ky| (-reach[0]..=reach[0]).map(move |kx| (kx, ky)))
            .collect();
        let masses: Vec<f64> = offsets
            .par_iter()
            .map(|&(kx, ky)| {
                let c = [kx as f64 * h[0], ky as f64 * h[1]];
                let lo = [c[0] - 0.5 * h[0], c[1] - 0.5 * h[1]];
                let hi = [c[0] + 0.5 * h[0], c[1] + 0.5 * h[1]];
                riesz_cell_integral(&params, &lo[..dim], &hi[..dim])
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); total];
        for (&(kx, ky), &m) in offsets.iter().zip(&masses) {
            let ix = kx.rem_euclid(padded[0] as i64) as usize;
            let iy = ky.rem_euclid(padded[1] as i64) as usize;
            kernel[ix + padded[0] * iy] = Complex64::new(m, 0.0);
        }

        let mut planner = FftPlanner::new();
        let forward = [planner.plan_fft_forward(padded[0]), planner.plan_fft_forward(padded[1])];
        let inverse = [planner.plan_fft_inverse(padded[0]), planner.plan_fft_inverse(padded[1])];
        let mut plan = Self {
            s,
            dim,
            shape,
            spacing: h,
            padded,
            spectrum: Vec::new(),
            forward,
            inverse,
        };
        plan.transform(&mut kernel, false);
        plan.spectrum = kernel;
        Ok(plan)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn padded_shape(&self) -> [usize; 2] {
        self.padded
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        grid.shape() == self.shape && grid.spacing() == self.spacing && grid.dim() == self.dim
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inverse } else { &self.forward };
        let [m0, m1] = self.padded;
        data.par_chunks_mut(m0).for_each(|row| plans[0].process(row));
        if m1 > 1 {
            let mut column = vec![Complex64::new(0.0, 0.0); m1];
            for ix in 0..m0 {
                for iy in 0..m1 {
                    column[iy] = data[ix + m0 * iy];
                }
                plans[1].process(&mut column);
                for iy in 0..m1 {
                    data[ix + m0 * iy] = column[iy];
                }
            }
        }
    }
}

/// `I_{1-s} * u` at every node of the box (the zero extension of `u`
/// outside the domain included).
pub fn riesz_potential(grid: &Grid, u: &ScalarField, plan: &ConvolutionPlan) -> Result<BoxPotential> {
    if !plan.matches(grid) {
        return Err(Error::Mismatch("convolution plan built for a different grid".into()));
    }
    u.check_grid(grid)?;
    let [m0, m1] = plan.padded;
    let [n0, n1] = plan.shape;
    let mut data = vec![Complex64::new(0.0, 0.0); m0 * m1];
    for (k, &node) in grid.interior_nodes().iter().enumerate() {
        let [ix, iy] = grid.node_lattice(node);
        data[ix + m0 * iy] = Complex64::new(u.values()[k], 0.0);
    }
    plan.transform(&mut data, false);
    for (d, k) in data.iter_mut().zip(&plan.spectrum) {
        *d *= k;
    }
    plan.transform(&mut data, true);
    let norm = 1.0 / (m0 * m1) as f64;
    let mut values = Vec::with_capacity(n0 * n1);
    for iy in 0..n1 {
        for ix in 0..n0 {
            values.push(data[ix + m0 * iy].re * norm);
        }
    }
    Ok(BoxPotential {
        shape: plan.shape,
        values,
    })
}

/// `D^s u` at interior nodes: central differences of the potential.
pub fn riesz_gradient(grid: &Grid, u: &ScalarField, plan: &ConvolutionPlan) -> Result<VectorField> {
    let pot = riesz_potential(grid, u, plan)?;
    let dim = grid.dim();
    let h = grid.spacing();
    let mut out = Vec::with_capacity(dim * grid.interior_count());
    for k in 0..grid.interior_count() {
        let [ix, iy] = grid.interior_lattice(k);
        out.push((pot.at(ix + 1, iy) - pot.at(ix - 1, iy)) / (2.0 * h[0]));
        if dim == 2 {
            out.push((pot.at(ix, iy + 1) - pot.at(ix, iy - 1)) / (2.0 * h[1]));
        }
    }
    VectorField::from_components(dim, out)
}
