//! On-disk cache of pair tables.
//!
//! A cache file is one JSON header line followed by the little-endian
//! `f64` payload: the stencil, then the exterior weights.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{assemble_weights_capped, OperatorParams, PairWeightTable};
use crate::error::{Error, Result};
use crate::grid::Grid;

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    key: String,
    dim: usize,
    shape: [usize; 2],
    spacing: [f64; 2],
    s: f64,
    p: f64,
    stencil_len: usize,
    exterior_len: usize,
}

/// Hex digest identifying `(domain, resolution, s, p)`.
pub fn cache_key(grid: &Grid, params: OperatorParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(FORMAT_VERSION.to_le_bytes());
    hasher.update(serde_json::to_vec(grid.domain()).expect("domain serializes"));
    hasher.update((grid.resolution() as u64).to_le_bytes());
    hasher.update(params.s().to_le_bytes());
    hasher.update(params.p().to_le_bytes());
    hex::encode(hasher.finalize())
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("weights-{}.bin", &key[..24]))
}

fn write_table(path: &Path, key: &str, table: &PairWeightTable) -> Result<()> {
    let header = Header {
        version: FORMAT_VERSION,
        key: key.to_string(),
        dim: table.dim(),
        shape: table.shape(),
        spacing: table.spacing(),
        s: table.params().s(),
        p: table.params().p(),
        stencil_len: table.stencil().len(),
        exterior_len: table.exterior_weights().len(),
    };
    let mut buf = serde_json::to_vec(&header)?;
    buf.push(b'\n');
    for v in table.stencil().iter().chain(table.exterior_weights()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    // write-then-rename keeps concurrent readers from seeing partial files
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut file = fs::File::create(&tmp)?;
    file.write_all(&buf)?;
    file.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_table(path: &Path, key: &str, grid: &Grid) -> Result<Option<PairWeightTable>> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Parse(format!("cache header {}: {e}", path.display())))?;
    if header.version != FORMAT_VERSION || header.key != key {
        return Ok(None);
    }
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let count = header.stencil_len + header.exterior_len;
    if payload.len() != 8 * count {
        return Err(Error::Parse(format!(
            "cache payload {} has {} bytes, expected {}",
            path.display(),
            payload.len(),
            8 * count
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let (stencil, exterior) = values.split_at(header.stencil_len);
    let lattice = (0..grid.interior_count())
        .map(|k| {
            let [ix, iy] = grid.interior_lattice(k);
            [ix as u32, iy as u32]
        })
        .collect();
    let params = OperatorParams::new(header.s, header.p)?;
    let table = PairWeightTable::from_parts(
        params,
        header.dim,
        header.shape,
        header.spacing,
        stencil.to_vec(),
        lattice,
        exterior.to_vec(),
    )?;
    if !table.matches(grid) {
        return Ok(None);
    }
    Ok(Some(table))
}

/// Reads the table from `cache_dir` if present, otherwise assembles it and
/// stores it there. Without a cache directory this is plain assembly.
pub fn load_or_assemble(
    grid: &Grid,
    params: OperatorParams,
    node_cap: usize,
    cache_dir: Option<&Path>,
) -> Result<PairWeightTable> {
    let Some(dir) = cache_dir else {
        return assemble_weights_capped(grid, params, node_cap);
    };
    if grid.interior_count() > node_cap {
        return Err(Error::MemoryBudget {
            nodes: grid.interior_count(),
            cap: node_cap,
        });
    }
    let key = cache_key(grid, params);
    let path = cache_path(dir, &key);
    if let Some(table) = read_table(&path, &key, grid)? {
        log::debug!("pair table loaded from {}", path.display());
        return Ok(table);
    }
    let table = assemble_weights_capped(grid, params, node_cap)?;
    fs::create_dir_all(dir)?;
    write_table(&path, &key, &table)?;
    log::debug!("pair table cached at {}", path.display());
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};

    #[test]
    fn cached_table_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid(&Domain::Disk { center: [0.0, 0.0], radius: 1.0 }, 9).unwrap();
        let params = OperatorParams::new(0.6, 3.0).unwrap();
        let fresh = load_or_assemble(&g, params, 4096, Some(dir.path())).unwrap();
        let cached = load_or_assemble(&g, params, 4096, Some(dir.path())).unwrap();
        assert_eq!(fresh.stencil(), cached.stencil());
        assert_eq!(fresh.exterior_weights(), cached.exterior_weights());
        let other = OperatorParams::new(0.5, 3.0).unwrap();
        assert_ne!(cache_key(&g, params), cache_key(&g, other));
    }
}
