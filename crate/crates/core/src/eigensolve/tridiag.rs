//! Real symmetric tridiagonal eigenproblems: Sturm-sequence bisection for the
//! eigenvalues, inverse iteration for the eigenvectors.

use serde::{Deserialize, Serialize};

use super::EigenResult;
use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidInput("empty tridiagonal matrix".into()));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::InvalidInput(format!(
                "off-diagonal length {} does not match diagonal length {}",
                off.len(),
                diag.len()
            )));
        }
        if diag.iter().chain(off.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite tridiagonal entry".into()));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Dense row-major copy, used by oracles and small exports.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i + 1 < n {
                m[i][i + 1] = self.off[i];
                m[i + 1][i] = self.off[i];
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    /// Number of eigenvalues strictly below `x` (negative pivots of the
    /// LDLᵀ factorization of `T - x I`).
    pub fn sturm_count(&self, x: f64) -> usize {
        let guard = f64::EPSILON * self.norm_bound() * 1e-3;
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.dim() {
            let qs = if q.abs() < guard {
                if q < 0.0 {
                    -guard
                } else {
                    guard
                }
            } else {
                q
            };
            let e = self.off[i - 1];
            q = (self.diag[i] - x) - e * e / qs;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `index`-th eigenvalue (0-based, ascending) by bisection, stopping
    /// when the bracket is narrower than `tol` or cannot shrink further.
    pub fn bisect_eigenvalue(&self, index: usize, tol: f64) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = 1e-14 * self.norm_bound();
        lo -= pad;
        hi += pad;
        loop {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= tol || mid <= lo || mid >= hi {
                return mid;
            }
            if self.sturm_count(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// Solves `(T - shift I) x = rhs` by Gaussian elimination with partial
    /// pivoting (the banded LU of LAPACK's `gtsv`). Returns `None` on an exact
    /// zero pivot.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        if n == 1 {
            let d = self.diag[0] - shift;
            return if d == 0.0 { None } else { Some(vec![rhs[0] / d]) };
        }
        let mut dl: Vec<f64> = self.off.clone();
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut du: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n];
        let mut b = rhs.to_vec();
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return None;
                }
                let f = dl[i] / d[i];
                d[i + 1] -= f * du[i];
                b[i + 1] -= f * b[i];
                dl[i] = 0.0;
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - f * tmp;
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du2[i];
                }
                du[i] = tmp;
                b.swap(i, i + 1);
                b[i + 1] -= f * b[i];
            }
        }
        if d[n - 1] == 0.0 {
            return None;
        }
        b[n - 1] /= d[n - 1];
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
        Some(b)
    }

    /// Eigenvector for an (accurate) eigenvalue by inverse iteration. The
    /// vector is orthogonalized against `deflate` (eigenvectors of nearby,
    /// already computed eigenvalues) and returned with unit 2-norm.
    pub fn inverse_iteration(&self, lambda: f64, deflate: &[&[f64]], max_iter: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        let scale = self.norm_bound();
        // Perturb the shift off the eigenvalue so the factorization exists.
        let mut shift = lambda - 4.0 * f64::EPSILON * scale;
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * ((i as f64) * 0.618_033_988_75).fract())
            .collect();
        normalize(&mut x);
        let mut y = vec![0.0; n];
        for it in 0..max_iter {
            let Some(mut z) = self.solve_shifted(shift, &x) else {
                shift -= 16.0 * f64::EPSILON * scale;
                continue;
            };
            for v in deflate {
                let c = dot(v, &z);
                for (zi, vi) in z.iter_mut().zip(v.iter()) {
                    *zi -= c * vi;
                }
            }
            let growth = norm(&z);
            if !growth.is_finite() || growth == 0.0 {
                return Err(Error::NoConvergence(format!(
                    "inverse iteration broke down at eigenvalue {lambda}"
                )));
            }
            for zi in z.iter_mut() {
                *zi /= growth;
            }
            x = z;
            self.matvec(&x, &mut y);
            let res = y
                .iter()
                .zip(x.iter())
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if it >= 1 && res <= 1e3 * f64::EPSILON * scale {
                return Ok(x);
            }
        }
        // Accept the last iterate if its residual is still acceptable.
        self.matvec(&x, &mut y);
        let res = y
            .iter()
            .zip(x.iter())
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if res <= 1e6 * f64::EPSILON * scale {
            Ok(x)
        } else {
            Err(Error::NoConvergence(format!(
                "inverse iteration at {lambda}: residual {res:e} after {max_iter} iterations"
            )))
        }
    }

    pub fn residual(&self, lambda: f64, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.dim()];
        self.matvec(x, &mut y);
        let r = y
            .iter()
            .zip(x.iter())
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        r / norm(x)
    }
}

/// Lowest `n_eigs` eigenpairs of a symmetric tridiagonal matrix.
///
/// Eigenvalues come from Sturm bisection to `tol`; eigenvectors from inverse
/// iteration at the converged shifts, with Gram-Schmidt against the vectors of
/// eigenvalues closer than `1e-8 ‖T‖`.
pub fn tridiag_smallest(diag: &[f64], offdiag: &[f64], n_eigs: usize, tol: f64) -> Result<EigenResult<f64>> {
    let t = SymTridiag::new(diag.to_vec(), offdiag.to_vec())?;
    if n_eigs == 0 || n_eigs > t.dim() {
        return Err(Error::InvalidInput(format!(
            "requested {n_eigs} eigenpairs of a {}x{} matrix",
            t.dim(),
            t.dim()
        )));
    }
    let scale = t.norm_bound();
    let values: Vec<f64> = (0..n_eigs).map(|j| t.bisect_eigenvalue(j, tol)).collect();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n_eigs);
    for (j, &lam) in values.iter().enumerate() {
        let close: Vec<&[f64]> = (0..j)
            .filter(|&i| (values[i] - lam).abs() < 1e-8 * scale)
            .map(|i| vectors[i].as_slice())
            .collect();
        let mut v = t.inverse_iteration(lam, &close, 8)?;
        fix_sign(&mut v);
        vectors.push(v);
    }
    let residuals = values
        .iter()
        .zip(vectors.iter())
        .map(|(&l, v)| t.residual(l, v))
        .collect();
    Ok(EigenResult {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
        iterations: 0,
        shift_used: f64::NAN,
    })
}

/// Sign convention: the component of largest modulus is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    a.iter_mut().for_each(|x| *x /= n);
}
