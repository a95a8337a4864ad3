//! Hermitian sparse storage: each off-diagonal pair is stored once, in the
//! upper triangle, so the implied full matrix is exactly Hermitian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HermitianSparse {
    dim: usize,
    /// `(row, col, value)` with `row <= col`, sorted, no duplicates.
    entries: Vec<(usize, usize, Complex64)>,
    mass: Option<Vec<f64>>,
}

/// Row-compressed copy of the full (both triangles) matrix.
#[derive(Debug, Clone)]
pub struct FullCsr {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<Complex64>,
}

impl FullCsr {
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for i in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[p] * x[self.col[p]];
            }
            y[i] = acc;
        }
    }
}

impl HermitianSparse {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn mass(&self) -> Option<&[f64]> {
        self.mass.as_deref()
    }

    pub fn nnz_upper(&self) -> usize {
        self.entries.len()
    }

    /// Attaches a positive diagonal mass (generalized problem `A x = λ M x`).
    pub fn with_mass(mut self, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "mass length {} for dimension {}",
                mass.len(),
                self.dim
            )));
        }
        if let Some(i) = mass.iter().position(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "mass entry {i} is {} (must be > 0)",
                mass[i]
            )));
        }
        self.mass = Some(mass);
        Ok(self)
    }

    pub fn mass_at(&self, i: usize) -> f64 {
        self.mass.as_ref().map_or(1.0, |m| m[i])
    }

    pub fn to_csr(&self) -> FullCsr {
        let n = self.dim;
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in &self.entries {
            counts[r + 1] += 1;
            if r != c {
                counts[c + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let nnz = counts[n];
        let mut next = counts.clone();
        let mut col = vec![0usize; nnz];
        let mut val = vec![Complex64::new(0.0, 0.0); nnz];
        for &(r, c, v) in &self.entries {
            col[next[r]] = c;
            val[next[r]] = v;
            next[r] += 1;
            if r != c {
                col[next[c]] = r;
                val[next[c]] = v.conj();
                next[c] += 1;
            }
        }
        // Sort each row by column for deterministic traversal.
        for i in 0..n {
            let (s, e) = (counts[i], counts[i + 1]);
            let mut idx: Vec<usize> = (s..e).collect();
            idx.sort_by_key(|&p| col[p]);
            let c2: Vec<usize> = idx.iter().map(|&p| col[p]).collect();
            let v2: Vec<Complex64> = idx.iter().map(|&p| val[p]).collect();
            col[s..e].copy_from_slice(&c2);
            val[s..e].copy_from_slice(&v2);
        }
        FullCsr {
            dim: n,
            row_ptr: counts,
            col,
            val,
        }
    }

    /// Dense copy (row-major). Only for small oracles and tests.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim;
        let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for &(r, c, v) in &self.entries {
            m[r][c] = v;
            m[c][r] = v.conj();
        }
        m
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v.re;
            }
        }
        d
    }

    /// Lower bound on the spectrum of `M^{-1/2} A M^{-1/2}` from Gershgorin
    /// discs of the scaled matrix.
    pub fn gershgorin_lower(&self) -> f64 {
        let mut radius = vec![0.0; self.dim];
        let mut diag = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            let s = (self.mass_at(r) * self.mass_at(c)).sqrt();
            if r == c {
                diag[r] = v.re / s;
            } else {
                radius[r] += v.norm() / s;
                radius[c] += v.norm() / s;
            }
        }
        diag.iter()
            .zip(radius.iter())
            .map(|(d, r)| d - r)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().map(|e| e.2.norm()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.2.re.is_finite() && e.2.im.is_finite())
    }

    /// Upper-triangle entries of `A - shift M`.
    pub fn shifted_entries(&self, shift: f64) -> Vec<(usize, usize, Complex64)> {
        self.entries
            .iter()
            .map(|&(r, c, v)| {
                if r == c {
                    (r, c, v - shift * self.mass_at(r))
                } else {
                    (r, c, v)
                }
            })
            .collect()
    }
}

/// Accumulates entries of a Hermitian matrix. Entries below the diagonal are
/// folded into the upper triangle by conjugation; duplicates are summed.
#[derive(Debug, Clone)]
pub struct HermitianBuilder {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl HermitianBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, cap: usize) -> Self {
        Self {
            dim,
            entries: Vec::with_capacity(cap),
        }
    }

    /// Adds `value` at `(row, col)`; the mirrored entry is implied.
    pub fn add(&mut self, row: usize, col: usize, value: Complex64) {
        debug_assert!(row < self.dim && col < self.dim);
        if row <= col {
            self.entries.push((row, col, value));
        } else {
            self.entries.push((col, row, value.conj()));
        }
    }

    /// Appends entries produced elsewhere (e.g. per row block).
    pub fn extend(&mut self, entries: impl IntoIterator<Item = (usize, usize, Complex64)>) {
        for (r, c, v) in entries {
            self.add(r, c, v);
        }
    }

    pub fn add_diag(&mut self, i: usize, value: f64) {
        self.entries.push((i, i, Complex64::new(value, 0.0)));
    }

    pub fn build(mut self) -> Result<HermitianSparse> {
        self.entries.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        for e in merged.iter_mut() {
            if !(e.2.re.is_finite() && e.2.im.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite matrix entry at ({}, {})",
                    e.0, e.1
                )));
            }
            if e.0 == e.1 {
                // Diagonal of a Hermitian matrix is real.
                e.2.im = 0.0;
            }
        }
        Ok(HermitianSparse {
            dim: self.dim,
            entries: merged,
            mass: None,
        })
    }
}
