//! One-dimensional model operators `D_τ² + (ζ − τ^{k+1}/(k+1))²` and their
//! lowest eigenvalue `ν^[k](ζ)` (the band function).
//!
//! `k = 0` lives on the half-line with a Neumann condition at `τ = 0`; `k ≥ 1`
//! on the full line. The artificial outer walls are Dirichlet ghost nodes one
//! spacing beyond the last grid node, so every grid node is an unknown.
//!
//! The Neumann ghost-node stencil gives a row `(2u₀ − 2u₁)/Δ²` that is not
//! symmetric; it is symmetrized by the diagonal similarity with the square
//! roots of the trapezoid weights, which turns the `(0,1)` coupling into
//! `−√2/Δ²`. Eigenvectors are mapped back before they are returned.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eigensolve::SymTridiag;
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::quad::trapezoid_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    FullLine,
    HalfLineNeumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub domain_kind: DomainKind,
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(domain_kind: DomainKind, x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidInput(format!("empty interval [{x_min}, {x_max}]")));
        }
        if n < 16 {
            return Err(Error::InvalidInput(format!("grid needs at least 16 nodes, got {n}")));
        }
        if domain_kind == DomainKind::HalfLineNeumann && x_min != 0.0 {
            return Err(Error::InvalidInput("half-line grid must start at 0".into()));
        }
        Ok(Grid1D {
            domain_kind,
            x_min,
            x_max,
            n,
        })
    }

    /// `[0, 20]` for `k = 0`, `[−15, 15]` otherwise; 4001 nodes.
    pub fn default_for(k: u32) -> Self {
        if k == 0 {
            Grid1D {
                domain_kind: DomainKind::HalfLineNeumann,
                x_min: 0.0,
                x_max: 20.0,
                n: 4001,
            }
        } else {
            Grid1D {
                domain_kind: DomainKind::FullLine,
                x_min: -15.0,
                x_max: 15.0,
                n: 4001,
            }
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let d = self.spacing();
        (0..self.n).map(|i| self.x_min + d * i as f64).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n, self.spacing())
    }

    /// Weights of the discrete inner product in which the operator is
    /// self-adjoint (the half-line node 0 carries half a cell).
    fn operator_weights(&self) -> Vec<f64> {
        let mut w = vec![1.0; self.n];
        if self.domain_kind == DomainKind::HalfLineNeumann {
            w[0] = 0.5;
        }
        w
    }

    fn check_k(&self, k: u32) -> Result<()> {
        match (k, self.domain_kind) {
            (0, DomainKind::HalfLineNeumann) => Ok(()),
            (0, _) => Err(Error::BoundaryMismatch(
                "k = 0 needs the half-line Neumann domain".into(),
            )),
            (_, DomainKind::FullLine) => Ok(()),
            _ => Err(Error::BoundaryMismatch(format!("k = {k} needs the full-line domain"))),
        }
    }
}

/// `τ^{k+1}/(k+1)`.
pub fn vanishing_profile(k: u32, tau: f64) -> f64 {
    tau.powi(k as i32 + 1) / (k + 1) as f64
}

/// Symmetric tridiagonal discretization of the model operator.
pub fn assemble_band_operator(k: u32, zeta: f64, grid: &Grid1D) -> Result<SymTridiag> {
    grid.check_k(k)?;
    let d = grid.spacing();
    let inv = 1.0 / (d * d);
    let mut diag = Vec::with_capacity(grid.n);
    for tau in grid.nodes() {
        let v = (zeta - vanishing_profile(k, tau)).powi(2);
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("potential is not finite at τ = {tau}")));
        }
        diag.push(2.0 * inv + v);
    }
    let mut off = vec![-inv; grid.n - 1];
    if grid.domain_kind == DomainKind::HalfLineNeumann {
        off[0] = -std::f64::consts::SQRT_2 * inv;
    }
    SymTridiag::new(diag, off)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandPoint {
    pub k: u32,
    pub zeta: f64,
    pub nu: f64,
    /// Node samples, unit norm under the trapezoid rule, positive at the
    /// node of largest modulus.
    pub eigenfunction: Vec<f64>,
    pub residual: f64,
    pub grid: Grid1D,
}

/// Lowest eigenpair of the discretized model operator.
///
/// The eigenvalue is bracketed by Sturm bisection, the vector comes from
/// inverse iteration, and the returned `nu` is the Rayleigh quotient written
/// as a sum of squares (differences and potential), which avoids the
/// cancellation of the `2/Δ²` diagonal.
pub fn band_value(k: u32, zeta: f64, grid: &Grid1D, tol: f64) -> Result<BandPoint> {
    let t = assemble_band_operator(k, zeta, grid)?;
    let lam = t.bisect_eigenvalue(0, tol.max(1e-15));
    let mut y = t.inverse_iteration(lam, &[], 20)?;
    let residual_vec = t.residual(lam, &y);
    let w = grid.operator_weights();
    let d = grid.spacing();
    // u_i = y_i / sqrt(w_i), up to the normalization fixed below.
    let mut u: Vec<f64> = y.iter().zip(&w).map(|(yi, wi)| yi / wi.sqrt()).collect();
    let nodes = grid.nodes();
    let mut energy = 0.0;
    let mut norm = 0.0;
    for i in 0..grid.n {
        let next = if i + 1 < grid.n { u[i + 1] } else { 0.0 };
        energy += (next - u[i]).powi(2) / d;
        energy += w[i] * d * (zeta - vanishing_profile(k, nodes[i])).powi(2) * u[i] * u[i];
        norm += w[i] * d * u[i] * u[i];
    }
    if grid.domain_kind == DomainKind::FullLine {
        // Ghost link to the left wall.
        energy += u[0] * u[0] / d;
    }
    let nu = energy / norm;

    let tw = grid.weights();
    let tn: f64 = u.iter().zip(&tw).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= tn);
    crate::eigensolve::fix_sign(&mut u);
    crate::eigensolve::fix_sign(&mut y);
    let residual = residual_vec.min(t.residual(nu, &y));
    if !(residual <= tol.max(1e3 * f64::EPSILON * t.gershgorin().1.abs())) {
        return Err(Error::NoConvergence(format!(
            "band value k={k}, ζ={zeta}: residual {residual:e}"
        )));
    }
    Ok(BandPoint {
        k,
        zeta,
        nu,
        eigenfunction: u,
        residual,
        grid: *grid,
    })
}

/// `ν′(ζ) = 2∫(ζ − τ^{k+1}/(k+1)) u² dτ` (Feynman-Hellmann), trapezoid rule.
pub fn band_derivative_fh(point: &BandPoint) -> f64 {
    let nodes = point.grid.nodes();
    let w = point.grid.weights();
    2.0 * nodes
        .iter()
        .zip(&point.eigenfunction)
        .zip(&w)
        .map(|((t, u), w)| (point.zeta - vanishing_profile(point.k, *t)) * u * u * w)
        .sum::<f64>()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandMinimum {
    pub k: u32,
    pub zeta0: f64,
    pub nu0: f64,
    pub nu2: f64,
    pub ground: BandPoint,
}

/// A bracket containing `ζ₀`. For even `k ≥ 2` the band is even in `ζ`
/// (`τ ↦ −τ`), so the bracket is symmetric.
pub fn default_bracket(k: u32) -> (f64, f64) {
    if k >= 2 && k.is_multiple_of(2) {
        (-2.0, 2.0)
    } else {
        (0.0, 2.0)
    }
}

/// Step of the 5-point second difference used for `ν″(ζ₀)`.
pub const NU2_STEP: f64 = 1e-3;

/// Minimizes `ζ ↦ ν^[k](ζ)` on `bracket` and measures the curvature there.
pub fn band_minimum(k: u32, grid: &Grid1D, bracket: (f64, f64), tol: f64) -> Result<BandMinimum> {
    let (lo, hi) = bracket;
    if !(hi > lo) {
        return Err(Error::InvalidInput(format!("bracket [{lo}, {hi}] is empty")));
    }
    let f = |z: f64| band_value(k, z, grid, tol).map(|p| p.nu);
    let (z0, _) = brent_minimize(f, lo, hi, 1e-9)?;
    let edge = 1e-6 * (hi - lo);
    if z0 - lo < edge || hi - z0 < edge {
        return Err(Error::BadBracket { lo, hi, at: z0 });
    }
    let ground = band_value(k, z0, grid, tol)?;
    let d = NU2_STEP;
    let v = |z: f64| band_value(k, z, grid, tol).map(|p| p.nu);
    let (m2, m1, p1, p2) = (v(z0 - 2.0 * d)?, v(z0 - d)?, v(z0 + d)?, v(z0 + 2.0 * d)?);
    let nu2 = (-p2 + 16.0 * p1 - 30.0 * ground.nu + 16.0 * m1 - m2) / (12.0 * d * d);
    if !(nu2 > 0.0) {
        return Err(Error::BadBracket { lo, hi, at: z0 });
    }
    Ok(BandMinimum {
        k,
        zeta0: z0,
        nu0: ground.nu,
        nu2,
        ground,
    })
}

/// Brent's method: golden-section steps with parabolic interpolation.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const CG: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + CG * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = xtol + 1e-10 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, fx));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(m - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = CG * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(Error::NoConvergence("Brent minimization did not converge".into()))
}

/// `C₁ = u(0)²/3` from the normalized half-line ground state.
pub fn moment_c1(ground: &BandPoint) -> Result<f64> {
    if ground.k != 0 || ground.grid.domain_kind != DomainKind::HalfLineNeumann {
        return Err(Error::InvalidInput(
            "C1 is defined for the k = 0 half-line model".into(),
        ));
    }
    Ok(ground.eigenfunction[0].powi(2) / 3.0)
}

/// Residuals of the four moment identities at the half-line band minimum:
/// `∫(ζ₀−τ)u²`, `∫u ∂_ζu`, `2∫(ζ₀−τ)u ∂_ζu − (ν″/2 − 1)` and
/// `∫(2τ(ζ₀−τ)² + τ²(ζ₀−τ))u² + u ∂_τu + C₁`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentResiduals {
    pub critical_point: f64,
    pub norm_derivative: f64,
    pub curvature: f64,
    pub c1_identity: f64,
}

impl MomentResiduals {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.critical_point,
            self.norm_derivative,
            self.curvature,
            self.c1_identity,
        ]
    }
}

/// Evaluates the moment identities; `∂_ζu` comes from central differences of
/// the eigenfunctions at `ζ₀ ± delta`.
pub fn moment_check_lemma58(min: &BandMinimum, delta: f64, tol: f64) -> Result<MomentResiduals> {
    let g = &min.ground;
    let c1 = moment_c1(g)?;
    let grid = g.grid;
    let up = band_value(0, min.zeta0 + delta, &grid, tol)?;
    let dn = band_value(0, min.zeta0 - delta, &grid, tol)?;
    let w = grid.weights();
    let overlap = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&w).map(|((x, y), w)| x * y * w).sum::<f64>();
    let mut dn_u = dn.eigenfunction.clone();
    if overlap(&up.eigenfunction, &dn_u) < 0.0 {
        dn_u.iter_mut().for_each(|x| *x = -*x);
    }
    if overlap(&up.eigenfunction, &dn_u) < 0.9 || overlap(&g.eigenfunction, &up.eigenfunction).abs() < 0.9 {
        return Err(Error::NoConvergence(
            "eigenfunctions at ζ₀ ± δ cannot be phase aligned".into(),
        ));
    }
    let du: Vec<f64> = up
        .eigenfunction
        .iter()
        .zip(&dn_u)
        .map(|(a, b)| (a - b) / (2.0 * delta))
        .collect();
    let u = &g.eigenfunction;
    let z = min.zeta0;
    let tau = grid.nodes();
    let h = grid.spacing();

    let mut i1 = 0.0;
    let mut i2 = 0.0;
    let mut i3 = 0.0;
    let mut i4 = 0.0;
    for i in 0..grid.n {
        let t = tau[i];
        i1 += w[i] * (z - t) * u[i] * u[i];
        i2 += w[i] * du[i] * u[i];
        i3 += w[i] * (z - t) * du[i] * u[i];
        // Centered τ-derivative; zero at the Neumann node, ghost zero beyond
        // the last node.
        let du_tau = if i == 0 {
            0.0
        } else {
            let next = if i + 1 < grid.n { u[i + 1] } else { 0.0 };
            (next - u[i - 1]) / (2.0 * h)
        };
        i4 += w[i] * ((2.0 * t * (z - t).powi(2) + t * t * (z - t)) * u[i] * u[i] + u[i] * du_tau);
    }
    Ok(MomentResiduals {
        critical_point: i1.abs(),
        norm_derivative: i2.abs(),
        curvature: (2.0 * i3 - (min.nu2 / 2.0 - 1.0)).abs(),
        c1_identity: (i4 + c1).abs(),
    })
}

/// Taylor coefficients `ν^{(n)}(ζ₀)/n!`, `n = 0..=order`, of the discrete band
/// function, from Rayleigh-Schrödinger perturbation of the tridiagonal
/// operator `H(ζ₀ + ε) = H₀ + ε·2(ζ₀ − q) + ε²`.
pub fn band_taylor(k: u32, zeta0: f64, grid: &Grid1D, order: usize, tol: f64) -> Result<Vec<f64>> {
    let t = assemble_band_operator(k, zeta0, grid)?;
    let p0 = band_value(k, zeta0, grid, tol)?;
    let e0 = p0.nu;
    // ψ₀ in the symmetrized variables, unit 2-norm.
    let w = grid.operator_weights();
    let mut psi0: Vec<f64> = p0.eigenfunction.iter().zip(&w).map(|(u, w)| u * w.sqrt()).collect();
    let nrm = psi0.iter().map(|x| x * x).sum::<f64>().sqrt();
    psi0.iter_mut().for_each(|x| *x /= nrm);
    let v1: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| 2.0 * (zeta0 - vanishing_profile(k, x)))
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    // Second eigenvalue sets the rate of the projected fixed-point solve.
    let e1 = t.bisect_eigenvalue(1, tol.max(1e-15));
    let eta = 0.05 * (e1 - e0);
    let solve_projected = |rhs: &[f64]| -> Result<Vec<f64>> {
        let mut x = vec![0.0; rhs.len()];
        for _ in 0..200 {
            let b: Vec<f64> = rhs.iter().zip(&x).map(|(r, xi)| r + eta * xi).collect();
            let mut z = t
                .solve_shifted(e0 - eta, &b)
                .ok_or_else(|| Error::Factorization("singular shifted band operator".into()))?;
            let c = dot(&psi0, &z);
            z.iter_mut().zip(&psi0).for_each(|(zi, p)| *zi -= c * p);
            let change = z.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let size = z.iter().map(|a| a.abs()).fold(0.0, f64::max);
            x = z;
            if change <= 1e-15 * size.max(1e-300) {
                break;
            }
        }
        Ok(x)
    };

    let mut coeffs = vec![e0];
    let mut psi: Vec<Vec<f64>> = vec![psi0.clone()];
    for n in 1..=order {
        let v1psi: Vec<f64> = v1.iter().zip(&psi[n - 1]).map(|(a, b)| a * b).collect();
        let mut en = dot(&psi0, &v1psi);
        if n == 2 {
            en += 1.0;
        }
        coeffs.push(en);
        if n == order {
            break;
        }
        let mut rhs: Vec<f64> = v1psi.iter().map(|x| -x).collect();
        if n >= 2 {
            rhs.iter_mut().zip(&psi[n - 2]).for_each(|(r, p)| *r -= p);
        }
        for j in 1..=n {
            let ej = coeffs[j];
            rhs.iter_mut().zip(&psi[n - j]).for_each(|(r, p)| *r += ej * p);
        }
        let c = dot(&psi0, &rhs);
        rhs.iter_mut().zip(&psi0).for_each(|(r, p)| *r -= c * p);
        psi.push(solve_projected(&rhs)?);
    }
    Ok(coeffs)
}

/// Band function sampled at `zetas`, in parallel.
pub fn band_table(k: u32, zetas: &[f64], grid: &Grid1D, tol: f64) -> Result<Vec<BandPoint>> {
    par_map(zetas, |&z| band_value(k, z, grid, tol)).into_iter().collect()
}

pub fn write_band_csv(path: &Path, points: &[BandPoint]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "k,zeta,nu,residual")?;
    for p in points {
        writeln!(f, "{},{:.15e},{:.15e},{:.3e}", p.k, p.zeta, p.nu, p.residual)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandMinimumRecord {
    pub k: u32,
    pub zeta0: f64,
    pub nu0: f64,
    pub nu2: f64,
    #[serde(rename = "C1", skip_serializing_if = "Option::is_none", default)]
    pub c1: Option<f64>,
}

impl BandMinimum {
    pub fn record(&self) -> BandMinimumRecord {
        BandMinimumRecord {
            k: self.k,
            zeta0: self.zeta0,
            nu0: self.nu0,
            nu2: self.nu2,
            c1: moment_c1(&self.ground).ok(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, &self.record())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumann_operator_small_example() {
        let g = Grid1D {
            domain_kind: DomainKind::HalfLineNeumann,
            x_min: 0.0,
            x_max: 1.0,
            n: 3,
        };
        let t = assemble_band_operator(0, 0.0, &g).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.diag[0], 8.0);
        assert_eq!(t.diag[1], 8.0 + 0.25);
        assert_eq!(t.diag[2], 8.0 + 1.0);
        assert!((t.off[0] + 4.0 * std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(t.off[1], -4.0);
    }

    #[test]
    fn potential_vanishes_on_the_parabola() {
        assert_eq!((0.5 - vanishing_profile(1, 1.0)).powi(2), 0.0);
    }

    #[test]
    fn mismatched_domain_is_rejected() {
        let g = Grid1D::default_for(1);
        assert!(matches!(
            assemble_band_operator(0, 0.5, &g),
            Err(Error::BoundaryMismatch(_))
        ));
        let g = Grid1D::default_for(0);
        assert!(matches!(
            assemble_band_operator(1, 0.5, &g),
            Err(Error::BoundaryMismatch(_))
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(DomainKind::FullLine, 0.0, 1.0, 8).is_err());
        assert!(Grid1D::new(DomainKind::HalfLineNeumann, -1.0, 1.0, 100).is_err());
        assert!(Grid1D::new(DomainKind::FullLine, 1.0, 1.0, 100).is_err());
    }

    #[test]
    fn harmonic_oscillator_as_k1_sanity() {
        // k=1 with ζ large and negative is not harmonic, but the quadratic
        // band ζ=0 potential τ⁴/4 has a known ground energy ≈ 0.66799 for
        // D² + τ⁴/4 (scaled quartic oscillator 4^{-1/3}·1.06036).
        let g = Grid1D::default_for(1);
        let p = band_value(1, 0.0, &g, 1e-12).unwrap();
        let expected = 1.060_362_090_484_18 * 4f64.powf(-1.0 / 3.0);
        assert!((p.nu - expected).abs() < 1e-5, "{} vs {expected}", p.nu);
    }

    #[test]
    fn brent_finds_parabola_vertex() {
        let (x, fx) = brent_minimize(|x| Ok((x - 0.3).powi(2) + 1.0), 0.0, 2.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-15);
    }
}
