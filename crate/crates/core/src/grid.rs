//! Uniform Cartesian grids over intervals, rectangles and disks, and
//! fields that vanish outside the domain.
//!
//! A [`ScalarField`] stores values for interior nodes only, so the
//! zero extension outside the domain holds by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Bounded domain in one or two dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { a1: f64, b1: f64, a2: f64, b2: f64 },
    Disk { center: [f64; 2], radius: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Interval { a, b } => a.is_finite() && b.is_finite() && a < b,
            Domain::Rectangle { a1, b1, a2, b2 } => {
                [a1, b1, a2, b2].iter().all(|v| v.is_finite()) && a1 < b1 && a2 < b2
            }
            Domain::Disk { center, radius } => {
                center.iter().all(|v| v.is_finite()) && radius.is_finite() && radius > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("empty or unbounded domain {self:?}")))
        }
    }

    /// Lower and upper corners of the bounding box (second axis unused in 1D).
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Domain::Interval { a, b } => ([a, 0.0], [b, 0.0]),
            Domain::Rectangle { a1, b1, a2, b2 } => ([a1, a2], [b1, b2]),
            Domain::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    /// Euclidean distance to the boundary for points inside, 0 outside.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let d = match *self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Rectangle { a1, b1, a2, b2 } => {
                (x[0] - a1).min(b1 - x[0]).min(x[1] - a2).min(b2 - x[1])
            }
            Domain::Disk { center, radius } => {
                radius - (x[0] - center[0]).hypot(x[1] - center[1])
            }
        };
        d.max(0.0)
    }

    /// Whether the domain has corners (boundary not C^{1,1}).
    pub fn has_corners(&self) -> bool {
        matches!(self, Domain::Rectangle { .. })
    }
}

const NOT_INTERIOR: usize = usize::MAX;

/// Uniform grid over the bounding box of a domain.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: Domain,
    resolution: usize,
    shape: [usize; 2],
    origin: [f64; 2],
    spacing: [f64; 2],
    interior: Vec<usize>,
    slot: Vec<usize>,
}

/// Builds the grid with `resolution` nodes per axis, boundary nodes included.
pub fn build_grid(domain: &Domain, resolution: usize) -> Result<Grid> {
    domain.validate()?;
    if resolution < 3 {
        return Err(Error::Resolution(resolution));
    }
    let dim = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let steps = (resolution - 1) as f64;
    let mut spacing = [1.0; 2];
    let mut shape = [resolution, 1];
    for d in 0..dim {
        spacing[d] = (hi[d] - lo[d]) / steps;
        shape[d] = resolution;
    }
    let node_count = shape[0] * shape[1];
    let mut grid = Grid {
        domain: domain.clone(),
        resolution,
        shape,
        origin: lo,
        spacing,
        interior: Vec::new(),
        slot: vec![NOT_INTERIOR; node_count],
    };
    for node in 0..node_count {
        let (ix, iy) = (node % shape[0], node / shape[0]);
        let inside = match *domain {
            Domain::Interval { .. } => ix > 0 && ix + 1 < shape[0],
            Domain::Rectangle { .. } => {
                ix > 0 && ix + 1 < shape[0] && iy > 0 && iy + 1 < shape[1]
            }
            Domain::Disk { center, radius } => {
                let x = grid.node_coords(node);
                (x[0] - center[0]).hypot(x[1] - center[1]) < radius * (1.0 - 1e-12)
            }
        };
        if inside {
            grid.slot[node] = grid.interior.len();
            grid.interior.push(node);
        }
    }
    if grid.interior.is_empty() {
        return Err(Error::Resolution(resolution));
    }
    Ok(grid)
}

impl Grid {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Nodes per axis; the second entry is 1 in 1D.
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    /// Spacing per axis; the second entry is 1 in 1D and never used.
    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim()].iter().product()
    }

    pub fn node_count(&self) -> usize {
        self.slot.len()
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        ix + self.shape[0] * iy
    }

    pub fn node_lattice(&self, node: usize) -> [usize; 2] {
        [node % self.shape[0], node / self.shape[0]]
    }

    /// Coordinates of a node; the second entry is 0 in 1D.
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let [ix, iy] = self.node_lattice(node);
        let mut x = [
            self.origin[0] + ix as f64 * self.spacing[0],
            self.origin[1] + iy as f64 * self.spacing[1],
        ];
        if self.dim() == 1 {
            x[1] = 0.0;
        }
        x
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Node indices of interior nodes, in increasing order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.slot[node] != NOT_INTERIOR
    }

    /// Position of `node` among the interior nodes.
    pub fn interior_slot(&self, node: usize) -> Option<usize> {
        match self.slot[node] {
            NOT_INTERIOR => None,
            k => Some(k),
        }
    }

    /// Coordinates of the `k`-th interior node.
    pub fn interior_coords(&self, k: usize) -> [f64; 2] {
        self.node_coords(self.interior[k])
    }

    /// Lattice indices of the `k`-th interior node.
    pub fn interior_lattice(&self, k: usize) -> [usize; 2] {
        self.node_lattice(self.interior[k])
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.domain == other.domain && self.resolution == other.resolution
    }
}

/// Values at interior nodes; identically zero elsewhere.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.interior_count()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            values: vec![c; grid.interior_count()],
        }
    }

    /// Field from interior values listed in interior-node order.
    pub fn from_interior(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_count() {
            return Err(Error::Mismatch(format!(
                "{} values for {} interior nodes",
                values.len(),
                grid.interior_count()
            )));
        }
        Ok(Self { values })
    }

    /// Field from values at every node; non-interior entries are dropped.
    pub fn from_nodal(grid: &Grid, nodal: &[f64]) -> Result<Self> {
        if nodal.len() != grid.node_count() {
            return Err(Error::Mismatch(format!(
                "{} nodal values for {} nodes",
                nodal.len(),
                grid.node_count()
            )));
        }
        Ok(Self {
            values: grid.interior_nodes().iter().map(|&n| nodal[n]).collect(),
        })
    }

    pub fn from_fn<F: FnMut([f64; 2]) -> f64>(grid: &Grid, mut f: F) -> Self {
        Self {
            values: (0..grid.interior_count())
                .map(|k| f(grid.interior_coords(k)))
                .collect(),
        }
    }

    pub(crate) fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Interior values in interior-node order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at an arbitrary node (0 off the interior).
    pub fn node_value(&self, grid: &Grid, node: usize) -> f64 {
        grid.interior_slot(node).map_or(0.0, |k| self.values[k])
    }

    /// Writes a node value; writes to non-interior nodes are rejected
    /// unless the value is exactly 0.
    pub fn set_node(&mut self, grid: &Grid, node: usize, value: f64) -> Result<()> {
        match grid.interior_slot(node) {
            Some(k) => {
                self.values[k] = value;
                Ok(())
            }
            None if value == 0.0 => Ok(()),
            None => Err(Error::Invariant(format!(
                "write of {value} to non-interior node {node}"
            ))),
        }
    }

    /// Values at every node, zeros off the interior.
    pub fn to_nodal(&self, grid: &Grid) -> Vec<f64> {
        let mut out = vec![0.0; grid.node_count()];
        for (k, &n) in grid.interior_nodes().iter().enumerate() {
            out[n] = self.values[k];
        }
        out
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.values.len() == grid.interior_count() {
            Ok(())
        } else {
            Err(Error::Mismatch(format!(
                "field has {} values, grid has {} interior nodes",
                self.values.len(),
                grid.interior_count()
            )))
        }
    }

    pub fn map<F: FnMut(f64) -> f64>(&self, f: F) -> Self {
        Self {
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.combine(1.0, other, -1.0)
    }

    pub fn max_abs(&self) -> f64 {
        crate::numeric::max_abs(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `N` components per interior node, stored node-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    dim: usize,
    values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            dim: grid.dim(),
            values: vec![0.0; grid.dim() * grid.interior_count()],
        }
    }

    pub fn from_components(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::Mismatch("vector data length not a multiple of N".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("non-finite vector field entry".into()));
        }
        Ok(Self { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Vector at the `k`-th interior node.
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    /// Euclidean length at every interior node.
    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.at(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// Exact distance to the boundary at interior nodes.
pub fn distance_field(grid: &Grid) -> ScalarField {
    let dim = grid.dim();
    ScalarField::from_fn(grid, |x| grid.domain().distance(&x[..dim]))
}

/// Cell-volume weighted sum over interior nodes.
pub fn integrate(grid: &Grid, field: &ScalarField) -> f64 {
    grid.cell_volume() * field.values().iter().copied().collect::<CompensatedSum>().value()
}

/// Discrete `L^p` norm; `p = f64::INFINITY` gives the maximum modulus.
pub fn lp_norm(grid: &Grid, field: &ScalarField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::domain(format!("L^p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(field.max_abs());
    }
    let sum: CompensatedSum = field.values().iter().map(|v| v.abs().powf(p)).collect();
    Ok((grid.cell_volume() * sum.value()).powf(1.0 / p))
}
