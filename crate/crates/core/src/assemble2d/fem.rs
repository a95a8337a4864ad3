//! Bilinear (Q1) finite elements for the boundary-curvature models, which
//! carry variable weights and a mixed `D_σ`/`D_τ` term that plain finite
//! differences do not keep Hermitian.
//!
//! Both models have the quadratic form
//! `∫ w_τ |∂_τ u|² + w_L |L u|² dσdτ` with `L = −i(a ∂_σ + c ∂_τ) + q` and
//! mass weight `m`. Every term is integrated with the cell-vertex
//! (trapezoidal) rule, so the mass matrix comes out diagonal and the pencil
//! is `A x = λ M x`. Gauss quadrature would couple neighbouring columns
//! through zeroth-order terms while the mass stays lumped, and when `h` is
//! small that admits spurious checkerboard modes far below the spectrum.
//! The Neumann side `τ = 0` is natural.

use num_complex::Complex64;

use super::sparse::{HermitianBuilder, HermitianSparse};
use super::Grid2D;
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::wkb::BoundaryGraph;

#[derive(Debug, Clone, Copy)]
struct Coeffs {
    a: f64,
    c: f64,
    q: f64,
    w_tau: f64,
    w_l: f64,
    mass: f64,
}

type CellOut = (Vec<(usize, usize, Complex64)>, Vec<(usize, f64)>);

fn assemble_q1<F>(grid: &Grid2D, coeffs: F) -> Result<HermitianSparse>
where
    F: Fn(f64, f64) -> Result<Coeffs> + Sync,
{
    grid.validate()?;
    let (ds, dt) = (grid.ds(), grid.dt());
    let gp = [0.0, 1.0];
    let wq = 0.25 * ds * dt;
    let columns: Vec<usize> = (0..grid.nx - 1).collect();
    let blocks: Vec<Result<CellOut>> = par_map(&columns, |&i| {
        let mut ent = Vec::with_capacity(grid.ny * 10);
        let mut mass = Vec::with_capacity(grid.ny * 4);
        for j in 0..grid.ny - 1 {
            let nodes = [
                grid.index(i, j),
                grid.index(i + 1, j),
                grid.index(i, j + 1),
                grid.index(i + 1, j + 1),
            ];
            if nodes.iter().all(Option::is_none) {
                continue;
            }
            let mut k = [[Complex64::new(0.0, 0.0); 4]; 4];
            let mut ml = [0.0; 4];
            for &xi in &gp {
                for &eta in &gp {
                    let sig = grid.s_at(i) + xi * ds;
                    let tau = grid.t_at(j) + eta * dt;
                    let cf = coeffs(sig, tau)?;
                    let n = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), (1.0 - xi) * eta, xi * eta];
                    let ns = [-(1.0 - eta) / ds, (1.0 - eta) / ds, -eta / ds, eta / ds];
                    let nt = [-(1.0 - xi) / dt, -xi / dt, (1.0 - xi) / dt, xi / dt];
                    let gv: [f64; 4] = std::array::from_fn(|p| cf.a * ns[p] + cf.c * nt[p]);
                    for p in 0..4 {
                        ml[p] += wq * cf.mass * n[p];
                        for r in 0..4 {
                            // conj(Lφ_p) Lφ_r with Lφ = −i g + q φ
                            let re = cf.w_tau * nt[p] * nt[r] + cf.w_l * (gv[p] * gv[r] + cf.q * cf.q * n[p] * n[r]);
                            let im = cf.w_l * cf.q * (gv[p] * n[r] - n[p] * gv[r]);
                            k[p][r] += Complex64::new(wq * re, wq * im);
                        }
                    }
                }
            }
            for p in 0..4 {
                let Some(ip) = nodes[p] else { continue };
                mass.push((ip, ml[p]));
                for r in 0..4 {
                    let Some(ir) = nodes[r] else { continue };
                    if ip <= ir {
                        ent.push((ip, ir, k[p][r]));
                    }
                }
            }
        }
        Ok((ent, mass))
    });
    let mut b = HermitianBuilder::with_capacity(grid.dim(), grid.dim() * 5);
    let mut mass = vec![0.0; grid.dim()];
    for block in blocks {
        let (ent, m) = block?;
        b.extend(ent);
        for (i, v) in m {
            mass[i] += v;
        }
    }
    b.build()?.with_mass(mass)
}

fn check_half_strip(grid: &Grid2D) -> Result<()> {
    grid.validate()?;
    if !grid.neumann_bottom() || grid.t_min != 0.0 {
        return Err(Error::BoundaryMismatch(
            "curvature models live on τ > 0 with Neumann at τ = 0".into(),
        ));
    }
    Ok(())
}

/// Tubular-coordinate model
/// `∫ m|D_τu|² + m⁻¹|(hD_σ + ζ₀ − τ + hκ(σ)τ²/2)u|²` in `L²(m dσdτ)`,
/// `m = 1 − hτκ(σ)`. Fails with [`Error::WeightNotPositive`] when `m ≤ 0`
/// anywhere on the grid.
pub fn assemble_camel(
    kappa: &(dyn Fn(f64) -> f64 + Sync),
    zeta0: f64,
    h: f64,
    grid: &Grid2D,
) -> Result<HermitianSparse> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("h = {h} must be positive")));
    }
    check_half_strip(grid)?;
    for i in 0..grid.nx {
        let s = grid.s_at(i);
        let k = kappa(s);
        // m is affine in τ, so the extreme row decides.
        let tau = if k > 0.0 { grid.t_max } else { grid.t_min };
        if 1.0 - h * tau * k <= 0.0 {
            return Err(Error::WeightNotPositive { sigma: s, tau });
        }
    }
    assemble_q1(grid, |s, tau| {
        let k = kappa(s);
        let m = 1.0 - h * tau * k;
        if m <= 0.0 {
            return Err(Error::WeightNotPositive { sigma: s, tau });
        }
        Ok(Coeffs {
            a: h,
            c: 0.0,
            q: zeta0 - tau + 0.5 * h * k * tau * tau,
            w_tau: m,
            w_l: 1.0 / m,
            mass: m,
        })
    })
}

/// The region `x₂ < −f(x₁)` with unit field, in sheared coordinates
/// `σ = x₁`, `t = −f(x₁) − x₂`, after the scaling `t = hτ` and division by
/// `h²` (`h² = ℏ`). The form is
/// `∫ |D_τu|² + |(hD_σ − f′(σ)D_τ + ζ₀√(1 + f′²) − τ)u|² dσdτ` with unit
/// mass. The change of variables is exact (unit Jacobian), so unlike
/// [`assemble_camel`] there is no validity strip in `τ`. The `√(1 + f′²)`
/// factor is a gauge choice (`e^{iθ(σ)/h}` with `θ′ = ζ₀(√(1 + f′²) − 1)`)
/// that removes the arclength oscillation of the low-lying modes.
pub fn assemble_camel_shear(curve: &BoundaryGraph, zeta0: f64, h: f64, grid: &Grid2D) -> Result<HermitianSparse> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("h = {h} must be positive")));
    }
    check_half_strip(grid)?;
    assemble_q1(grid, |s, tau| {
        Ok(Coeffs {
            a: h,
            c: -curve.df(s),
            q: zeta0 * (1.0 + curve.df(s).powi(2)).sqrt() - tau,
            w_tau: 1.0,
            w_l: 1.0,
            mass: 1.0,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band1d::{band_minimum, Grid1D};
    use crate::eigensolve::sparse_smallest;

    #[test]
    fn flat_models_coincide_and_have_unit_mass() {
        let g = Grid2D::half_strip(1.0, 6.0, 12, 20).unwrap();
        let a = assemble_camel(&|_| 0.0, 0.77, 0.3, &g).unwrap();
        let b = assemble_camel_shear(&BoundaryGraph { f: vec![0.5] }, 0.77, 0.3, &g).unwrap();
        assert_eq!(a.entries(), b.entries());
        let (ds, dt) = (g.ds(), g.dt());
        for idx in 0..g.dim() {
            let (_, j) = g.node(idx);
            let expect = if j == 0 { 0.5 * ds * dt } else { ds * dt };
            assert!((a.mass_at(idx) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn weight_positivity_is_enforced() {
        let g = Grid2D::half_strip(1.0, 10.0, 12, 20).unwrap();
        let r = assemble_camel(&|_| 8.0, 0.77, 0.1, &g);
        assert!(matches!(r, Err(Error::WeightNotPositive { .. })));
        assert!(assemble_camel(&|_| 8.0, 0.77, 0.01, &g).is_ok());
    }

    #[test]
    fn flat_boundary_recovers_theta0() {
        let m0 = band_minimum(0, &Grid1D::default_for(0), (0.2, 1.5), 1e-12).unwrap();
        let (a, h) = (1.0, 0.01);
        let run = |ny: usize| {
            let g = Grid2D::half_strip(a, 10.0, 24, ny).unwrap();
            let m = assemble_camel(&|_| 0.0, m0.zeta0, h, &g).unwrap();
            sparse_smallest(&m, 1, 0.0, 1e-11, 500).unwrap().eigenvalues[0]
        };
        // Lowest σ-mode adds ν″/2 · h²π²/(2a)² to leading order.
        let sigma_mode = 0.5 * m0.nu2 * h * h * std::f64::consts::PI.powi(2) / (4.0 * a * a);
        let (l1, l2) = (run(201), run(401));
        let extrap = (4.0 * l2 - l1) / 3.0 - sigma_mode;
        assert!((extrap - m0.nu0).abs() < 2e-5, "{extrap} vs {}", m0.nu0);
    }
}
