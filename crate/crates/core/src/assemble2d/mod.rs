//! Sparse Hermitian discretizations of 2D magnetic operators on rectangles.
//!
//! Nodes sit on a uniform tensor grid including the box boundary. Dirichlet
//! sides drop their boundary nodes from the unknowns; a Neumann side at
//! `t = t_min` keeps them. Unknowns are numbered `s`-major:
//! `idx = (i - 1) * n_t + (j - j0)`.

pub mod export;
pub mod fem;
pub mod sparse;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::par_map;
use crate::wkb::WellProfile;

pub use export::{export_matrix, MatrixSidecar};
pub use fem::{assemble_camel, assemble_camel_shear};
pub use sparse::{FullCsr, HermitianBuilder, HermitianSparse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideBc {
    pub s_min: Bc,
    pub s_max: Bc,
    pub t_min: Bc,
    pub t_max: Bc,
}

impl SideBc {
    pub const DIRICHLET: SideBc = SideBc {
        s_min: Bc::Dirichlet,
        s_max: Bc::Dirichlet,
        t_min: Bc::Dirichlet,
        t_max: Bc::Dirichlet,
    };

    pub const NEUMANN_BOTTOM: SideBc = SideBc {
        t_min: Bc::Neumann,
        ..SideBc::DIRICHLET
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub s_min: f64,
    pub s_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub bc: SideBc,
}

impl Grid2D {
    pub fn new(s: (f64, f64), t: (f64, f64), nx: usize, ny: usize, bc: SideBc) -> Result<Self> {
        let g = Grid2D {
            s_min: s.0,
            s_max: s.1,
            t_min: t.0,
            t_max: t.1,
            nx,
            ny,
            bc,
        };
        g.validate()?;
        Ok(g)
    }

    /// `(−a, a) × (−b, b)`, Dirichlet on all sides.
    pub fn dirichlet_box(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new((-a, a), (-b, b), nx, ny, SideBc::DIRICHLET)
    }

    /// `(−a, a) × (0, b)`, Neumann at `t = 0`.
    pub fn half_strip(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new((-a, a), (0.0, b), nx, ny, SideBc::NEUMANN_BOTTOM)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 || self.ny < 8 {
            return Err(Error::InvalidInput(format!(
                "grid {}x{} is below 8x8",
                self.nx, self.ny
            )));
        }
        if !(self.s_max > self.s_min)
            || !(self.t_max > self.t_min)
            || !self.s_min.is_finite()
            || !self.t_max.is_finite()
        {
            return Err(Error::InvalidInput("grid extents must be finite and increasing".into()));
        }
        let b = self.bc;
        if b.s_min != Bc::Dirichlet || b.s_max != Bc::Dirichlet || b.t_max != Bc::Dirichlet {
            return Err(Error::BoundaryMismatch(
                "only t = t_min may carry a Neumann condition".into(),
            ));
        }
        Ok(())
    }

    pub fn ds(&self) -> f64 {
        (self.s_max - self.s_min) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / (self.ny - 1) as f64
    }

    pub fn s_at(&self, i: usize) -> f64 {
        self.s_min + self.ds() * i as f64
    }

    pub fn t_at(&self, j: usize) -> f64 {
        self.t_min + self.dt() * j as f64
    }

    pub fn neumann_bottom(&self) -> bool {
        self.bc.t_min == Bc::Neumann
    }

    /// First unknown row in `t`.
    pub fn j0(&self) -> usize {
        if self.neumann_bottom() {
            0
        } else {
            1
        }
    }

    pub fn n_s(&self) -> usize {
        self.nx - 2
    }

    pub fn n_t(&self) -> usize {
        self.ny - 1 - self.j0()
    }

    pub fn dim(&self) -> usize {
        self.n_s() * self.n_t()
    }

    /// Unknown index of node `(i, j)`, or `None` on a Dirichlet side.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || i + 1 >= self.nx || j < self.j0() || j + 1 >= self.ny {
            None
        } else {
            Some((i - 1) * self.n_t() + (j - self.j0()))
        }
    }

    /// Node `(i, j)` of unknown `idx`.
    pub fn node(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_t() + 1, idx % self.n_t() + self.j0())
    }

    /// Undoes the diagonal similarity used to symmetrize the mirror-ghost
    /// Neumann stencil in the finite-difference assemblers: the `t = t_min`
    /// row is divided by `√(1/2)`.
    pub fn fd_unsymmetrize(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut u = y.to_vec();
        if self.neumann_bottom() {
            let f = std::f64::consts::SQRT_2;
            for (idx, v) in u.iter_mut().enumerate() {
                if self.node(idx).1 == 0 {
                    *v *= f;
                }
            }
        }
        u
    }

    /// Same box with a different resolution.
    pub fn with_resolution(&self, nx: usize, ny: usize) -> Result<Self> {
        Self::new((self.s_min, self.s_max), (self.t_min, self.t_max), nx, ny, self.bc)
    }
}

/// Real bivariate polynomial `Σ c[p][q] s^p t^q`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bivariate {
    pub coeffs: Vec<Vec<f64>>,
}

impl Bivariate {
    pub fn new(coeffs: Vec<Vec<f64>>) -> Self {
        Bivariate { coeffs }
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, row| acc * s + row.iter().rev().fold(0.0, |a, &c| a * t + c))
    }
}

/// Finite differences for `D_t² + (hD_s + A₁(s, t))²` expanded as
/// `h²D_s² + D_t² + A₁² + h(D_sA₁ + A₁D_s)`. The first-order term uses the
/// averaged link value `(A₁(i) + A₁(i+1))/2`, so the `(i, i+1)` entry is
/// `−h²/Δs² − ih(A₁(i) + A₁(i+1))/(2Δs)` and the matrix is exactly Hermitian.
fn assemble_fd<F>(grid: &Grid2D, h: f64, a1: F) -> Result<HermitianSparse>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("h = {h} must be positive")));
    }
    grid.validate()?;
    let (ds, dt) = (grid.ds(), grid.dt());
    let (cs, ct) = (h * h / (ds * ds), 1.0 / (dt * dt));
    let neumann = grid.neumann_bottom();
    let columns: Vec<usize> = (1..grid.nx - 1).collect();
    let blocks = par_map(&columns, |&i| {
        let mut out = Vec::with_capacity(grid.ny * 3);
        let s = grid.s_at(i);
        let s_next = grid.s_at(i + 1);
        for j in grid.j0()..grid.ny - 1 {
            let t = grid.t_at(j);
            let me = grid.index(i, j).unwrap();
            let a = a1(s, t);
            out.push((me, me, Complex64::new(2.0 * cs + 2.0 * ct + a * a, 0.0)));
            if let Some(right) = grid.index(i + 1, j) {
                let link = h * (a + a1(s_next, t)) / (2.0 * ds);
                out.push((me, right, Complex64::new(-cs, -link)));
            }
            if let Some(up) = grid.index(i, j + 1) {
                // Mirror ghost at a Neumann bottom gives −2/Δt² in row 0 and
                // −1/Δt² in row 1; the symmetrized coupling is −√2/Δt².
                let c = if neumann && j == 0 {
                    std::f64::consts::SQRT_2 * ct
                } else {
                    ct
                };
                out.push((me, up, Complex64::new(-c, 0.0)));
            }
        }
        out
    });
    let mut b = HermitianBuilder::with_capacity(grid.dim(), grid.dim() * 3);
    for block in blocks {
        b.extend(block);
    }
    b.build()
}

/// `D_t² + (hD_s + A₁)²` for a user polynomial `A₁`.
pub fn assemble_general(a1: &Bivariate, h: f64, grid: &Grid2D) -> Result<HermitianSparse> {
    assemble_fd(grid, h, |s, t| a1.eval(s, t))
}

fn check_montgomery_bc(k: u32, grid: &Grid2D) -> Result<()> {
    grid.validate()?;
    if k == 0 {
        if !grid.neumann_bottom() || grid.t_min != 0.0 {
            return Err(Error::BoundaryMismatch(
                "k = 0 needs the half-plane t > 0 with Neumann at t = 0".into(),
            ));
        }
    } else if grid.neumann_bottom() {
        return Err(Error::BoundaryMismatch(format!(
            "k = {k} lives on the full plane; use Dirichlet on all sides"
        )));
    }
    Ok(())
}

/// `D_t² + (hD_s − γ(s)t^{k+1}/(k+1))²`.
pub fn assemble_montgomery(k: u32, well: &WellProfile, h: f64, grid: &Grid2D) -> Result<HermitianSparse> {
    assemble_montgomery_gauged(k, well, h, grid, 0.0)
}

/// As [`assemble_montgomery`] after conjugation by `e^{−iξ₀s/h}`, i.e.
/// `D_t² + (hD_s + ξ₀ − γ(s)t^{k+1}/(k+1))²`. Same spectrum; with
/// `ξ₀ = ζ₀γ₀^{1/(k+2)}` the low-lying eigenvectors stop oscillating in `s`,
/// which reduces the `s`-discretization error.
pub fn assemble_montgomery_gauged(
    k: u32,
    well: &WellProfile,
    h: f64,
    grid: &Grid2D,
    xi0: f64,
) -> Result<HermitianSparse> {
    check_montgomery_bc(k, grid)?;
    let kp = (k + 1) as f64;
    assemble_fd(grid, h, |s, t| xi0 - well.eval(s) * t.powi(k as i32 + 1) / kp)
}
