//! CSV and JSON file formats.
//!
//! Scalar fields are written at every grid node (exterior nodes carry 0) as
//! `x[,y],value` with a JSON sidecar `<file>.json` holding the domain,
//! resolution and spacing. Vector fields are written at interior nodes as
//! `x[,y],g1[,g2]`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::SolveReport;
use crate::grid::{Domain, Grid, ScalarField, VectorField};

/// Sidecar describing the grid of a field file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub domain: Domain,
    pub resolution: usize,
    pub h: Vec<f64>,
}

impl GridSidecar {
    pub fn of(grid: &Grid) -> Self {
        Self {
            domain: grid.domain().clone(),
            resolution: grid.resolution(),
            h: grid.spacing()[..grid.dim()].to_vec(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn coord_header(dim: usize) -> &'static str {
    if dim == 1 { "x" } else { "x,y" }
}

fn push_coords(line: &mut String, x: [f64; 2], dim: usize) {
    use std::fmt::Write as _;
    let _ = write!(line, "{:.16e}", x[0]);
    if dim == 2 {
        let _ = write!(line, ",{:.16e}", x[1]);
    }
}

/// Writes `field` and its sidecar.
pub fn write_scalar_csv(path: &Path, grid: &Grid, field: &ScalarField) -> Result<()> {
    field.check_grid(grid)?;
    let dim = grid.dim();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},value", coord_header(dim))?;
    let mut line = String::new();
    for node in 0..grid.node_count() {
        line.clear();
        push_coords(&mut line, grid.node_coords(node), dim);
        writeln!(w, "{line},{:.16e}", field.node_value(grid, node))?;
    }
    w.flush()?;
    let side = serde_json::to_string_pretty(&GridSidecar::of(grid))?;
    std::fs::write(sidecar_path(path), side)?;
    Ok(())
}

fn parse_rows(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if row.len() != columns {
            return Err(Error::Parse(format!(
                "{}:{}: expected {columns} columns, found {}",
                path.display(),
                n + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a scalar CSV written for `grid`. Rows are matched to nodes by
/// position; coordinates must agree to `1e-9 h`.
pub fn read_scalar_csv(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let dim = grid.dim();
    let rows = parse_rows(path, dim + 1)?;
    if rows.len() != grid.node_count() {
        return Err(Error::Mismatch(format!(
            "{} has {} rows, grid has {} nodes",
            path.display(),
            rows.len(),
            grid.node_count()
        )));
    }
    let h = grid.spacing();
    let mut nodal = Vec::with_capacity(rows.len());
    for (node, row) in rows.iter().enumerate() {
        let x = grid.node_coords(node);
        for d in 0..dim {
            if (row[d] - x[d]).abs() > 1e-9 * h[d] {
                return Err(Error::Mismatch(format!(
                    "{}: row {} coordinate {} differs from grid node {:?}",
                    path.display(),
                    node + 2,
                    row[d],
                    &x[..dim]
                )));
            }
        }
        nodal.push(row[dim]);
    }
    ScalarField::from_nodal(grid, &nodal)
}

/// Reads a scalar CSV together with its sidecar and rebuilds the grid.
pub fn read_scalar_with_grid(path: &Path) -> Result<(Grid, ScalarField)> {
    let side: GridSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let grid = crate::grid::build_grid(&side.domain, side.resolution)?;
    let field = read_scalar_csv(path, &grid)?;
    Ok((grid, field))
}

/// Writes a vector field at interior nodes.
pub fn write_vector_csv(path: &Path, grid: &Grid, field: &VectorField) -> Result<()> {
    let dim = grid.dim();
    if field.len() != grid.interior_count() || field.dim() != dim {
        return Err(Error::Mismatch("vector field does not match the grid".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let comps = if dim == 1 { "g1" } else { "g1,g2" };
    writeln!(w, "{},{comps}", coord_header(dim))?;
    let mut line = String::new();
    for k in 0..field.len() {
        line.clear();
        push_coords(&mut line, grid.interior_coords(k), dim);
        for c in field.at(k) {
            line.push_str(&format!(",{c:.16e}"));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Per-iteration history as `k,step_seminorm,frozen_residual,full_residual,v_norm`.
pub fn write_convergence_csv(path: &Path, report: &SolveReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,step_seminorm,frozen_residual,full_residual,v_norm")?;
    for k in 0..report.step_seminorms.len() {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            k + 1,
            report.step_seminorms[k],
            report.frozen_residuals[k],
            report.full_residuals[k],
            report.v_norms[k]
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
