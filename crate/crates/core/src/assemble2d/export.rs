//! Coordinate-format text export of assembled matrices.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sparse::HermitianSparse;
use super::{Grid2D, SideBc};
use crate::error::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub dim: usize,
    pub h: f64,
    pub k: Option<u32>,
    pub grid: Grid2D,
    pub bc: SideBc,
    /// Both triangles are written.
    pub storage: String,
    pub nnz: usize,
}

/// Writes `<stem>.coo` (`row col re im`, 0-based, full matrix),
/// `<stem>.json` and, for generalized problems, `<stem>.mass` (one value per
/// line). Returns the paths written.
pub fn export_matrix(
    dir: &Path,
    stem: &str,
    m: &HermitianSparse,
    h: f64,
    k: Option<u32>,
    grid: &Grid2D,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let coo = dir.join(format!("{stem}.coo"));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&coo)?);
    let mut nnz = 0;
    for &(r, c, v) in m.entries() {
        writeln!(f, "{r} {c} {:.17e} {:.17e}", v.re, v.im)?;
        nnz += 1;
        if r != c {
            writeln!(f, "{c} {r} {:.17e} {:.17e}", v.re, -v.im)?;
            nnz += 1;
        }
    }
    f.flush()?;
    let side = MatrixSidecar {
        dim: m.dim(),
        h,
        k,
        grid: *grid,
        bc: grid.bc,
        storage: "full".into(),
        nnz,
    };
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&json, serde_json::to_string_pretty(&side)?)?;
    let mut out = vec![coo, json];
    if let Some(mass) = m.mass() {
        let p = dir.join(format!("{stem}.mass"));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&p)?);
        for v in mass {
            writeln!(f, "{v:.17e}")?;
        }
        f.flush()?;
        out.push(p);
    }
    Ok(out)
}
