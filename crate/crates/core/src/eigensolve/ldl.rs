//! Sparse up-looking `L D L^H` factorization of a Hermitian matrix.
//!
//! No pivoting is performed, so the matrix must be strongly regular in the
//! chosen ordering. For a shifted Hermitian pencil below the spectrum this
//! always holds; above it the signs of `D` give the inertia.

use num_complex::Complex64;

use super::ordering::{nested_dissection, Graph};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<Complex64>,
    d: Vec<f64>,
}

/// Signs of the pivots of `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl LdlFactor {
    /// Factors the Hermitian matrix given by its upper-triangle entries,
    /// using a nested-dissection ordering of its graph.
    pub fn factor(n: usize, upper: &[(usize, usize, Complex64)]) -> Result<Self> {
        let g = Graph::from_upper_pairs(n, upper.iter().map(|e| (e.0, e.1)));
        let perm = nested_dissection(&g, 64);
        Self::factor_with_perm(n, upper, perm)
    }

    pub fn factor_with_perm(n: usize, upper: &[(usize, usize, Complex64)], perm: Vec<usize>) -> Result<Self> {
        if perm.len() != n {
            return Err(Error::InvalidInput(format!(
                "permutation length {} for dimension {n}",
                perm.len()
            )));
        }
        let mut iperm = vec![NONE; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || iperm[old] != NONE {
                return Err(Error::InvalidInput("ordering is not a permutation".into()));
            }
            iperm[old] = new;
        }

        // Upper triangle of P A P^T in compressed-column form.
        let mut ccount = vec![0usize; n + 1];
        let mut mapped = Vec::with_capacity(upper.len());
        for &(r, c, v) in upper {
            if r >= n || c >= n {
                return Err(Error::InvalidInput(format!("entry ({r}, {c}) outside dimension {n}")));
            }
            let (p, q) = (iperm[r], iperm[c]);
            let e = if p <= q { (p, q, v) } else { (q, p, v.conj()) };
            ccount[e.1 + 1] += 1;
            mapped.push(e);
        }
        for k in 0..n {
            ccount[k + 1] += ccount[k];
        }
        let mut next = ccount.clone();
        let mut ai = vec![0usize; mapped.len()];
        let mut ax = vec![Complex64::new(0.0, 0.0); mapped.len()];
        for (p, q, v) in mapped {
            ai[next[q]] = p;
            ax[next[q]] = v;
            next[q] += 1;
        }
        let ap = ccount;

        // Symbolic: elimination tree and column counts.
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &i0 in &ai[ap[k]..ap[k + 1]] {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![Complex64::new(0.0, 0.0); nnz];
        let mut d = vec![0.0; n];

        // Numeric.
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        let mut pattern = vec![0usize; n];
        lnz.iter_mut().for_each(|x| *x = 0);
        flag.iter_mut().for_each(|x| *x = NONE);
        let scale = upper
            .iter()
            .map(|e| e.2.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                y[i] += ax[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k].re;
            y[k] = Complex64::new(0.0, 0.0);
            for t in top..n {
                let i = pattern[t];
                let yi = y[i];
                y[i] = Complex64::new(0.0, 0.0);
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let lki = yi.conj() / d[i];
                dk -= yi.norm_sqr() / d[i];
                li[p2] = k;
                lx[p2] = lki;
                lnz[i] += 1;
            }
            if !dk.is_finite() || dk.abs() <= 1e-14 * scale {
                return Err(Error::Factorization(format!("zero pivot at column {k} (value {dk:e})")));
            }
            d[k] = dk;
        }

        Ok(LdlFactor { n, perm, lp, li, lx, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    pub fn inertia(&self) -> Inertia {
        let mut out = Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };
        for &x in &self.d {
            if x > 0.0 {
                out.positive += 1;
            } else if x < 0.0 {
                out.negative += 1;
            } else {
                out.zero += 1;
            }
        }
        out
    }

    /// Solves `A x = b`, overwriting `b` with `x`. `work` must have length `n`.
    pub fn solve_in_place(&self, b: &mut [Complex64], work: &mut [Complex64]) {
        let n = self.n;
        for k in 0..n {
            work[k] = b[self.perm[k]];
        }
        for j in 0..n {
            let zj = work[j];
            if zj != Complex64::new(0.0, 0.0) {
                for p in self.lp[j]..self.lp[j + 1] {
                    work[self.li[p]] -= self.lx[p] * zj;
                }
            }
        }
        for j in 0..n {
            work[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut acc = work[j];
            for p in self.lp[j]..self.lp[j + 1] {
                acc -= self.lx[p].conj() * work[self.li[p]];
            }
            work[j] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = work[k];
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        let mut work = vec![Complex64::new(0.0, 0.0); self.n];
        self.solve_in_place(&mut x, &mut work);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble2d::sparse::HermitianBuilder;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn magnetic_grid(nx: usize, ny: usize, shift: f64) -> crate::assemble2d::sparse::HermitianSparse {
        let id = |i: usize, j: usize| i * ny + j;
        let mut b = HermitianBuilder::new(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                b.add_diag(id(i, j), 4.0 - shift + 0.01 * j as f64);
                if i + 1 < nx {
                    let ph = 0.3 * j as f64;
                    b.add(id(i, j), id(i + 1, j), -c(ph.cos(), ph.sin()));
                }
                if j + 1 < ny {
                    b.add(id(i, j), id(i, j + 1), c(-1.0, 0.0));
                }
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn solve_matches_matvec() {
        let a = magnetic_grid(17, 13, 0.5);
        let f = LdlFactor::factor(a.dim(), a.entries()).unwrap();
        let x: Vec<Complex64> = (0..a.dim())
            .map(|i| c((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let mut b = vec![c(0.0, 0.0); a.dim()];
        a.to_csr().matvec(&x, &mut b);
        let x2 = f.solve(&b);
        let err = x.iter().zip(&x2).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn inertia_counts_eigenvalues_below_shift() {
        // 1D Laplacian eigenvalues 2 - 2cos(k pi/(n+1)).
        let n = 40;
        let shift = 1.1;
        let mut b = HermitianBuilder::new(n);
        for i in 0..n {
            b.add_diag(i, 2.0 - shift);
            if i + 1 < n {
                b.add(i, i + 1, c(-1.0, 0.0));
            }
        }
        let a = b.build().unwrap();
        let f = LdlFactor::factor(n, a.entries()).unwrap();
        let expected = (1..=n)
            .filter(|&k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos() < shift)
            .count();
        assert_eq!(f.inertia().negative, expected);
    }

    #[test]
    fn exact_zero_pivot_is_reported() {
        let mut b = HermitianBuilder::new(2);
        b.add_diag(0, 0.0);
        b.add_diag(1, 1.0);
        let a = b.build().unwrap();
        assert!(LdlFactor::factor_with_perm(2, a.entries(), vec![0, 1]).is_err());
    }
}
