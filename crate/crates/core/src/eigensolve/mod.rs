//! Lowest eigenpairs of symmetric tridiagonal and sparse Hermitian problems.

pub mod lanczos;
pub mod ldl;
pub mod ordering;
pub mod tridiag;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use lanczos::{fix_phase, sparse_smallest, sparse_smallest_with, SolveOptions};
pub use ldl::{Inertia, LdlFactor};
pub use tridiag::{fix_sign, tridiag_smallest, SymTridiag};

use crate::error::Result;

/// Lowest eigenpairs, ascending. `residuals[i]` is `‖Ax-λMx‖_{M^{-1}}/‖x‖_M`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult<T> {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<T>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub shift_used: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    eigenvalues: &'a [f64],
    residuals: &'a [f64],
    iterations: usize,
    shift_used: Option<f64>,
    dim: usize,
    n_vectors: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DumpHeader {
    pub dim: usize,
    pub n_vectors: usize,
    /// Each value is a pair of little-endian f64 (re, im); vectors are stored
    /// one after another.
    pub dtype: String,
    pub layout: String,
}

impl<T> EigenResult<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Eigenvalues, residuals and metadata (no vectors) as JSON.
    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        let s = Summary {
            eigenvalues: &self.eigenvalues,
            residuals: &self.residuals,
            iterations: self.iterations,
            shift_used: self.shift_used.is_finite().then_some(self.shift_used),
            dim: self.eigenvectors.first().map_or(0, Vec::len),
            n_vectors: self.eigenvectors.len(),
        };
        let f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(f, &s)?;
        Ok(())
    }
}

impl EigenResult<Complex64> {
    /// Writes the eigenvectors to `<stem>.bin` and the shape header to
    /// `<stem>.json`.
    pub fn write_vector_dump(&self, dir: &Path, stem: &str) -> Result<()> {
        let header = DumpHeader {
            dim: self.eigenvectors.first().map_or(0, Vec::len),
            n_vectors: self.eigenvectors.len(),
            dtype: "complex-f64-le".into(),
            layout: "column".into(),
        };
        let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.bin")))?);
        for v in &self.eigenvectors {
            for z in v {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        w.flush()?;
        let f = BufWriter::new(File::create(dir.join(format!("{stem}.json")))?);
        serde_json::to_writer_pretty(f, &header)?;
        Ok(())
    }
}

/// Reads a dump written by [`EigenResult::write_vector_dump`].
pub fn read_vector_dump(dir: &Path, stem: &str) -> Result<(DumpHeader, Vec<Vec<Complex64>>)> {
    let header: DumpHeader = serde_json::from_reader(File::open(dir.join(format!("{stem}.json")))?)?;
    let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
    if bytes.len() != 16 * header.dim * header.n_vectors {
        return Err(crate::error::Error::MissingData(format!(
            "dump {stem}.bin has {} bytes, header expects {}",
            bytes.len(),
            16 * header.dim * header.n_vectors
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    let vectors = bytes
        .chunks_exact(16 * header.dim.max(1))
        .take(header.n_vectors)
        .map(|col| {
            col.chunks_exact(16)
                .map(|z| Complex64::new(f(&z[..8]), f(&z[8..])))
                .collect()
        })
        .collect();
    Ok((header, vectors))
}
