//! Nonlocal calculus and solvers for the fractional (p,q)-Laplacian
//! Dirichlet problem with a weakly singular reaction and a convective term
//! driven by the Riesz fractional gradient.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: Riesz and Bessel potential kernels.
//! * [`grid`]: uniform grids, zero-extended fields, distance function.
//! * [`gagliardo`]: discrete Gagliardo seminorm, energy and weak form.
//! * [`riesz`]: fractional gradient `D^s u = grad(I_{1-s} * u)` by FFT.
//! * [`reaction`]: reaction terms, truncation and hypothesis checks.
//! * [`torsion`]: positive sub-solution from the torsion problem.
//! * [`frozen`]: the problem with frozen convection, solved by minimisation.
//! * [`fixed_point`]: relaxed Picard iteration on `v -> u_v`.
//! * [`config`] and [`io`]: run configuration and file formats.

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fixed_point;
pub mod frozen;
pub mod gagliardo;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod minimize;
pub mod numeric;
pub mod reaction;
pub mod riesz;
pub mod selftest;
pub mod torsion;

pub use config::{load_config, RunConfig};
pub use error::{Error, Result};
pub use fixed_point::{solve_problem, Instance, OuterOptions, SolveReport};
pub use frozen::{FrozenProblem, MinimizerOptions};
pub use gagliardo::{OperatorParams, PairWeightTable};
pub use grid::{build_grid, distance_field, Domain, Grid, ScalarField, VectorField};
pub use kernels::{BesselParams, RieszParams};
pub use reaction::{ConvectiveReaction, HypothesisReport, ProblemExponents, SingularReaction};
pub use riesz::ConvolutionPlan;
pub use torsion::SubsolutionCertificate;
