//! Shift-invert Lanczos for the lowest eigenpairs of `A x = λ M x` with `A`
//! Hermitian sparse and `M` positive diagonal.
//!
//! The operator is `T = (A - σM)^{-1} M`, self-adjoint in the `M` inner
//! product. The projected matrix is kept in full (every Gram-Schmidt
//! coefficient is stored), which makes thick restarts and injected random
//! directions fit the same Rayleigh-Ritz step. After the wanted pairs first
//! converge, a fresh random direction is injected and the run continues until
//! the wanted set is reproduced. This recovers partners of near-degenerate
//! pairs that a single Krylov sequence cannot separate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ldl::LdlFactor;
use super::EigenResult;
use crate::assemble2d::sparse::{FullCsr, HermitianSparse};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub n_eigs: usize,
    pub shift: f64,
    /// Relative residual tolerance: `‖Ax-λMx‖ ≤ tol·max(1,|λ|)·‖x‖_M`.
    pub tol: f64,
    /// Cap on applications of the shifted inverse.
    pub max_iter: usize,
    /// Basis size that triggers a thick restart.
    pub max_basis: usize,
    pub seed: u64,
    /// Confirm the converged set from an injected random direction.
    pub confirm: bool,
}

impl SolveOptions {
    pub fn new(n_eigs: usize, shift: f64) -> Self {
        SolveOptions {
            n_eigs,
            shift,
            tol: 1e-10,
            max_iter: 3000,
            max_basis: 300,
            seed: 0x5eed,
            confirm: true,
        }
    }
}

/// Lowest `n_eigs` eigenpairs above `shift`, which must lie below the spectrum.
pub fn sparse_smallest(
    a: &HermitianSparse,
    n_eigs: usize,
    shift: f64,
    tol: f64,
    max_iter: usize,
) -> Result<EigenResult<Complex64>> {
    let mut opts = SolveOptions::new(n_eigs, shift);
    opts.tol = tol;
    opts.max_iter = max_iter;
    sparse_smallest_with(a, &opts)
}

struct Problem {
    csr: FullCsr,
    factor: LdlFactor,
    mass: Vec<f64>,
    work: Vec<Complex64>,
}

impl Problem {
    fn dot(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let mut acc = ZERO;
        for ((a, b), m) in x.iter().zip(y).zip(&self.mass) {
            acc += a.conj() * b * m;
        }
        acc
    }

    fn norm(&self, x: &[Complex64]) -> f64 {
        x.iter()
            .zip(&self.mass)
            .map(|(a, m)| a.norm_sqr() * m)
            .sum::<f64>()
            .sqrt()
    }

    fn apply(&mut self, v: &[Complex64]) -> Vec<Complex64> {
        let mut w: Vec<Complex64> = v.iter().zip(&self.mass).map(|(x, m)| x * m).collect();
        self.factor.solve_in_place(&mut w, &mut self.work);
        w
    }

    /// `‖Ax - λMx‖_{M^{-1}} / ‖x‖_M`.
    fn residual(&self, lambda: f64, x: &[Complex64]) -> f64 {
        let mut ax = vec![ZERO; x.len()];
        self.csr.matvec(x, &mut ax);
        let r: f64 = ax
            .iter()
            .zip(x)
            .zip(&self.mass)
            .map(|((ax, x), m)| (ax - x * (lambda * m)).norm_sqr() / m)
            .sum();
        r.sqrt() / self.norm(x)
    }
}

struct Basis {
    vecs: Vec<Vec<Complex64>>,
    /// `h[i][j] = <v_i, T v_j>_M` for processed `j`, mirrored.
    h: Vec<Vec<Complex64>>,
    processed: usize,
}

impl Basis {
    fn len(&self) -> usize {
        self.vecs.len()
    }

    /// Orthogonalizes `v` (twice) and appends it; returns false if nothing
    /// independent is left.
    fn push(&mut self, p: &Problem, mut v: Vec<Complex64>) -> bool {
        let before = p.norm(&v);
        if before == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for b in &self.vecs {
                let c = p.dot(b, &v);
                axpy(&mut v, -c, b);
            }
        }
        let after = p.norm(&v);
        if after <= 1e-10 * before {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= after);
        self.vecs.push(v);
        for row in self.h.iter_mut() {
            row.push(ZERO);
        }
        self.h.push(vec![ZERO; self.vecs.len()]);
        true
    }
}

fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

struct Ritz {
    theta: Vec<f64>,
    /// Columns of the projected eigenvector matrix, descending `theta`.
    vecs: DMatrix<Complex64>,
    estimate: Vec<f64>,
}

/// Rayleigh-Ritz on the processed part of the basis.
fn ritz(basis: &Basis) -> Ritz {
    let p = basis.processed;
    let m = DMatrix::from_fn(p, p, |i, j| if i <= j { basis.h[i][j] } else { basis.h[j][i].conj() });
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    let n = basis.len();
    let estimate = (0..p)
        .map(|c| {
            let mut acc = 0.0;
            for i in p..n {
                let mut s = ZERO;
                for j in 0..p {
                    s += basis.h[i][j] * vecs[(j, c)];
                }
                acc += s.norm_sqr();
            }
            acc.sqrt()
        })
        .collect();
    Ritz { theta, vecs, estimate }
}

fn ritz_vector(basis: &Basis, ritz: &Ritz, c: usize) -> Vec<Complex64> {
    let dim = basis.vecs[0].len();
    let mut x = vec![ZERO; dim];
    for j in 0..basis.processed {
        axpy(&mut x, ritz.vecs[(j, c)], &basis.vecs[j]);
    }
    x
}

/// Makes the first component above `1e-6` of the maximum modulus positive real.
pub fn fix_phase(x: &mut [Complex64]) {
    let max = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = x.iter().find(|z| z.norm() > 1e-6 * max).copied() {
        let ph = z.conj() / z.norm();
        x.iter_mut().for_each(|v| *v *= ph);
    }
}

pub fn sparse_smallest_with(a: &HermitianSparse, opts: &SolveOptions) -> Result<EigenResult<Complex64>> {
    let n = a.dim();
    let k = opts.n_eigs;
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenpairs of dimension {n}"
        )));
    }
    if !(opts.tol > 0.0) || !opts.shift.is_finite() {
        return Err(Error::InvalidInput(
            "tolerance must be positive and shift finite".into(),
        ));
    }
    if !a.all_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let factor = LdlFactor::factor(n, &a.shifted_entries(opts.shift))?;
    let inertia = factor.inertia();
    if inertia.negative > 0 {
        return Err(Error::ShiftAboveSpectrum {
            shift: opts.shift,
            count: inertia.negative,
        });
    }
    let mut prob = Problem {
        csr: a.to_csr(),
        factor,
        mass: (0..n).map(|i| a.mass_at(i)).collect(),
        work: vec![ZERO; n],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let max_basis = opts.max_basis.max(2 * k + 10).min(n);
    let mut basis = Basis {
        vecs: Vec::new(),
        h: Vec::new(),
        processed: 0,
    };
    let start = random_vector(&mut rng, n);
    basis.push(&prob, start);

    let mut iterations = 0;
    let mut last_check = 0;
    let mut accepted: Option<Vec<f64>> = None;
    let mut injections = 0;
    let mut since_injection = 0;
    let mut wait = 8;
    let mut best: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut exhausted = false;

    loop {
        if basis.len() >= max_basis && basis.processed + 1 >= basis.len() {
            let rz = ritz(&basis);
            thick_restart(&mut basis, &rz, k);
            last_check = basis.processed;
        }
        if basis.processed == basis.len() {
            // Invariant subspace: continue from a fresh direction.
            exhausted = !(0..4).any(|_| {
                let v = random_vector(&mut rng, n);
                basis.push(&prob, v)
            });
        }

        if !exhausted {
            let j = basis.processed;
            let mut w = prob.apply(&basis.vecs[j]);
            let mut coef = vec![ZERO; basis.len()];
            for _ in 0..2 {
                for (i, b) in basis.vecs.iter().enumerate() {
                    let c = prob.dot(b, &w);
                    axpy(&mut w, -c, b);
                    coef[i] += c;
                }
            }
            for (i, c) in coef.into_iter().enumerate() {
                basis.h[i][j] = c;
                basis.h[j][i] = c.conj();
            }
            basis.h[j][j].im = 0.0;
            basis.processed += 1;
            iterations += 1;
            since_injection += 1;

            let beta = prob.norm(&w);
            let scale = basis.h[j][j].norm().max(f64::MIN_POSITIVE);
            if beta > 1e-13 * scale && basis.len() < n {
                w.iter_mut().for_each(|x| *x /= beta);
                if basis.push(&prob, w.clone()) {
                    let p = basis.len() - 1;
                    let c = prob.dot(&basis.vecs[p], &w) * beta;
                    basis.h[p][j] = c;
                    basis.h[j][p] = c.conj();
                }
            }
        }

        let p = basis.processed;
        let full = basis.len() >= max_basis && basis.processed + 1 >= basis.len();
        let due = p >= k && (p - last_check >= (p / 10).max(1) || exhausted || full || iterations >= opts.max_iter);
        if !due {
            continue;
        }
        last_check = p;
        let rz = ritz(&basis);
        let lambdas: Vec<f64> = rz.theta[..k].iter().map(|t| opts.shift + 1.0 / t).collect();
        let estimates_ok = rz.theta[..k]
            .iter()
            .zip(&rz.estimate[..k])
            .zip(&lambdas)
            .all(|((t, e), l)| *t > 0.0 && e / t <= opts.tol * l.abs().max(1.0));
        if estimates_ok || exhausted || iterations >= opts.max_iter {
            let vectors: Vec<Vec<Complex64>> = (0..k).map(|c| ritz_vector(&basis, &rz, c)).collect();
            let residuals: Vec<f64> = lambdas
                .iter()
                .zip(&vectors)
                .map(|(l, x)| prob.residual(*l, x))
                .collect();
            let ok = residuals
                .iter()
                .zip(&lambdas)
                .all(|(r, l)| *r <= opts.tol * l.abs().max(1.0));
            best = Some((lambdas.clone(), residuals));
            let waiting = accepted.is_some() && since_injection < wait;
            if ok && !waiting {
                let confirmed = accepted.as_ref().is_some_and(|prev| {
                    prev.iter()
                        .zip(&lambdas)
                        .all(|(a, b)| (a - b).abs() <= 10.0 * opts.tol * b.abs().max(1.0))
                });
                if confirmed || !opts.confirm || injections >= 4 || exhausted {
                    return Ok(finish(&prob, opts.shift, lambdas, vectors, iterations));
                }
                if accepted.is_none() {
                    wait = wait.max(iterations / 2);
                }
                accepted = Some(lambdas);
                injections += 1;
                if basis.len() + 1 >= max_basis {
                    thick_restart(&mut basis, &rz, k);
                }
                let v = random_vector(&mut rng, n);
                basis.push(&prob, v);
                since_injection = 0;
                last_check = basis.processed;
                continue;
            }
        }
        if iterations >= opts.max_iter || exhausted {
            let (l, r) = best.unwrap_or_default();
            return Err(Error::NoConvergence(format!(
                "shift-invert Lanczos after {iterations} steps: eigenvalues {l:?}, residuals {r:?}"
            )));
        }
    }
}

/// Keeps the leading Ritz vectors plus all unprocessed basis vectors.
fn thick_restart(basis: &mut Basis, rz: &Ritz, k: usize) {
    let p = basis.processed;
    let keep = (k + k.max(10)).min(p.saturating_sub(1)).max(1);
    let mut vecs: Vec<Vec<Complex64>> = (0..keep).map(|c| ritz_vector(basis, rz, c)).collect();
    let tail: Vec<usize> = (p..basis.len()).collect();
    let n = keep + tail.len();
    let mut h = vec![vec![ZERO; n]; n];
    for c in 0..keep {
        h[c][c] = Complex64::new(rz.theta[c], 0.0);
    }
    for (ti, &i) in tail.iter().enumerate() {
        for c in 0..keep {
            let mut s = ZERO;
            for j in 0..p {
                s += basis.h[i][j] * rz.vecs[(j, c)];
            }
            h[keep + ti][c] = s;
            h[c][keep + ti] = s.conj();
        }
    }
    for &i in &tail {
        vecs.push(std::mem::take(&mut basis.vecs[i]));
    }
    basis.vecs = vecs;
    basis.h = h;
    basis.processed = keep;
}

fn finish(
    prob: &Problem,
    shift: f64,
    lambdas: Vec<f64>,
    mut vectors: Vec<Vec<Complex64>>,
    iterations: usize,
) -> EigenResult<Complex64> {
    let mut idx: Vec<usize> = (0..lambdas.len()).collect();
    idx.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
    let mut values = Vec::with_capacity(idx.len());
    let mut vecs = Vec::with_capacity(idx.len());
    let mut residuals = Vec::with_capacity(idx.len());
    for i in idx {
        let mut x = std::mem::take(&mut vectors[i]);
        let nrm = prob.norm(&x);
        x.iter_mut().for_each(|v| *v /= nrm);
        fix_phase(&mut x);
        residuals.push(prob.residual(lambdas[i], &x));
        values.push(lambdas[i]);
        vecs.push(x);
    }
    EigenResult {
        eigenvalues: values,
        eigenvectors: vecs,
        residuals,
        iterations,
        shift_used: shift,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble2d::sparse::HermitianBuilder;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dirichlet Laplacian on an `nx × ny` grid with unit spacing.
    fn laplacian(nx: usize, ny: usize) -> HermitianSparse {
        let id = |i: usize, j: usize| i * ny + j;
        let mut b = HermitianBuilder::new(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                b.add_diag(id(i, j), 4.0);
                if i + 1 < nx {
                    b.add(id(i, j), id(i + 1, j), c(-1.0, 0.0));
                }
                if j + 1 < ny {
                    b.add(id(i, j), id(i, j + 1), c(-1.0, 0.0));
                }
            }
        }
        b.build().unwrap()
    }

    fn mode(k: usize, n: usize) -> f64 {
        2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos()
    }

    #[test]
    fn laplacian_modes_with_exact_multiplicity() {
        // Square grid: modes (1,2) and (2,1) are exactly degenerate.
        let n = 30;
        let a = laplacian(n, n);
        let r = sparse_smallest(&a, 4, 0.0, 1e-10, 2000).unwrap();
        let mut exact: Vec<f64> = (1..5)
            .flat_map(|i| (1..5).map(move |j| mode(i, n) + mode(j, n)))
            .collect();
        exact.sort_by(f64::total_cmp);
        for (got, want) in r.eigenvalues.iter().zip(&exact) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        for res in &r.residuals {
            assert!(*res <= 1e-10);
        }
    }

    #[test]
    fn shift_above_spectrum_is_reported() {
        let a = laplacian(10, 10);
        match sparse_smallest(&a, 2, 1.0, 1e-10, 500) {
            Err(Error::ShiftAboveSpectrum { count, .. }) => assert!(count >= 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn generalized_problem_uses_mass_inner_product() {
        // A = diag(1..n) + coupling, M = diag(2): eigenvalues halve.
        let n = 200;
        let a = laplacian(n, 1);
        let am = laplacian(n, 1).with_mass(vec![2.0; n]).unwrap();
        let r1 = sparse_smallest(&a, 3, 1.0, 1e-11, 500).unwrap();
        let r2 = sparse_smallest(&am, 3, 0.5, 1e-11, 500).unwrap();
        for (x, y) in r1.eigenvalues.iter().zip(&r2.eigenvalues) {
            assert!((x / 2.0 - y).abs() < 1e-11);
        }
        let nrm: f64 = r2.eigenvectors[0].iter().map(|z| 2.0 * z.norm_sqr()).sum();
        assert!((nrm - 1.0).abs() < 1e-10);
    }
}
