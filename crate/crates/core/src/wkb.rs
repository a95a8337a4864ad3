//! Semiclassical predictions: harmonic (transport) eigenvalue corrections,
//! the eikonal phase as a Taylor series, Agmon distances, and the boundary
//! curvature ("camel") expansion.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band1d::BandMinimum;
use crate::error::{Error, Result};
use crate::quad::{adaptive_trapezoid, gauss_legendre};

// ---------------------------------------------------------------------------
// Polynomials and truncated power series

/// Horner evaluation of `Σ c_i x^i`.
pub fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

pub fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, a)| a * i as f64).collect()
}

/// Coefficients of `p(x0 + x)`.
pub fn poly_shift(c: &[f64], x0: f64) -> Vec<f64> {
    let mut out = c.to_vec();
    let n = out.len();
    // Repeated synthetic division.
    for i in 0..n {
        for j in (i..n - 1).rev() {
            out[j] += x0 * out[j + 1];
        }
    }
    out
}

fn series_mul<T>(a: &[T], b: &[T], len: usize) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    let mut out = vec![T::default(); len];
    for (i, &x) in a.iter().enumerate().take(len) {
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] = out[i + j] + x * y;
        }
    }
    out
}

/// `(c₀ + g)^q` truncated to `len` terms, `c₀ > 0`, by the binomial series.
fn series_pow(c: &[f64], q: f64, len: usize) -> Vec<f64> {
    let c0 = c[0];
    let mut g: Vec<f64> = c.iter().map(|x| x / c0).collect();
    g[0] = 0.0;
    g.resize(len.max(1), 0.0);
    let mut out = vec![0.0; len];
    let mut term = vec![0.0; len];
    term[0] = 1.0;
    let mut binom = 1.0;
    for n in 0..len {
        for i in 0..len {
            out[i] += binom * term[i];
        }
        term = series_mul(&term, &g, len);
        binom *= (q - n as f64) / (n as f64 + 1.0);
    }
    let scale = c0.powf(q);
    out.iter_mut().for_each(|x| *x *= scale);
    out
}

// ---------------------------------------------------------------------------
// Well profiles

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellMinimum {
    pub s: f64,
    pub gamma: f64,
    pub gamma2: f64,
}

/// Field strength `γ(s)` along the cancellation curve, as a polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellProfile {
    /// Ascending coefficients.
    pub gamma: Vec<f64>,
    pub minima: Vec<WellMinimum>,
    pub gamma0: f64,
    pub s_range: (f64, f64),
}

impl WellProfile {
    /// Locates the global minima of `γ` on `s_range` and checks `γ > 0` there.
    pub fn new(gamma: Vec<f64>, s_range: (f64, f64)) -> Result<Self> {
        let (a, b) = s_range;
        if gamma.is_empty() || !(b > a) {
            return Err(Error::InvalidWell("empty polynomial or range".into()));
        }
        let mut coeffs = gamma.clone();
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        let n = 4000;
        let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| poly_eval(&coeffs, x)).collect();
        if let Some(i) = vals.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidWell(format!(
                "γ({}) = {} is not positive",
                xs[i], vals[i]
            )));
        }
        if coeffs.len() == 1 {
            let g0 = coeffs[0];
            return Ok(WellProfile {
                gamma,
                minima: vec![WellMinimum {
                    s: 0.0,
                    gamma: g0,
                    gamma2: 0.0,
                }],
                gamma0: g0,
                s_range,
            });
        }
        let d1 = poly_derivative(&coeffs);
        let d2 = poly_derivative(&d1);
        let mut cands = Vec::new();
        for i in 1..n {
            if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
                // Newton on γ′ from the sampled local minimum.
                let mut x = xs[i];
                for _ in 0..50 {
                    let g2 = poly_eval(&d2, x);
                    if g2 <= 0.0 {
                        break;
                    }
                    let step = poly_eval(&d1, x) / g2;
                    x -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                cands.push(x);
            }
        }
        let gmin = cands
            .iter()
            .map(|&x| poly_eval(&coeffs, x))
            .fold(f64::INFINITY, f64::min);
        if !gmin.is_finite() {
            return Err(Error::InvalidWell("no interior minimum on the range".into()));
        }
        let mut minima: Vec<WellMinimum> = Vec::new();
        for x in cands {
            let g = poly_eval(&coeffs, x);
            if (g - gmin).abs() <= 1e-10 * gmin && !minima.iter().any(|m| (m.s - x).abs() < 1e-8) {
                minima.push(WellMinimum {
                    s: if x.abs() < 1e-14 { 0.0 } else { x },
                    gamma: g,
                    gamma2: poly_eval(&d2, x),
                });
            }
        }
        minima.sort_by(|p, q| p.s.total_cmp(&q.s));
        Ok(WellProfile {
            gamma,
            minima,
            gamma0: gmin,
            s_range,
        })
    }

    /// `γ(s) = 1 + 4s²`.
    pub fn simple() -> Self {
        Self::new(vec![1.0, 0.0, 4.0], (-3.0, 3.0)).expect("valid profile")
    }

    /// `γ(s) = 1 + (s² − 1)²`, wells at `±1`.
    pub fn double() -> Self {
        Self::new(vec![2.0, 0.0, -2.0, 0.0, 1.0], (-3.0, 3.0)).expect("valid profile")
    }

    pub fn eval(&self, s: f64) -> f64 {
        poly_eval(&self.gamma, s)
    }

    pub fn is_even(&self) -> bool {
        self.gamma.iter().skip(1).step_by(2).all(|&c| c == 0.0)
    }
}

// ---------------------------------------------------------------------------
// Montgomery expansion

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WkbExpansion {
    pub k: u32,
    pub lambda0: f64,
    /// `λ_{n,1}` for `n = 1..=n_max`.
    pub lambda1_of_n: Vec<f64>,
    /// Taylor coefficients of `Φ` at the well.
    pub phi_taylor: Vec<Complex64>,
    pub phi2: f64,
}

/// Leading eigenvalue `γ₀^{2/(k+2)} ν(ζ₀)` and the harmonic corrections
/// `λ_{n,1} = ν″(ζ₀) Φ″(0) (n − 1/2)`.
pub fn montgomery_expansion(k: u32, well: &WellProfile, band: &BandMinimum, n_max: usize) -> Result<WkbExpansion> {
    if band.k != k {
        return Err(Error::InvalidInput(format!("band data is for k = {}, not {k}", band.k)));
    }
    if !(band.nu2 > 0.0) {
        return Err(Error::InvalidWell(format!("ν″(ζ₀) = {} is not positive", band.nu2)));
    }
    let m = well.minima[0];
    if m.gamma2 < 0.0 {
        return Err(Error::InvalidWell(format!("γ″ = {} at the well", m.gamma2)));
    }
    let kk = k as f64 + 2.0;
    let lambda0 = well.gamma0.powf(2.0 / kk) * band.nu0;
    let phi2 = well.gamma0.powf(1.0 / kk) * ((2.0 / kk) * m.gamma2 * band.nu0 / (m.gamma * band.nu2)).sqrt();
    let lambda1_of_n = (1..=n_max).map(|n| band.nu2 * phi2 * (n as f64 - 0.5)).collect();
    Ok(WkbExpansion {
        k,
        lambda0,
        lambda1_of_n,
        phi_taylor: vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5 * phi2, 0.0),
        ],
        phi2,
    })
}

/// Taylor coefficients `Φ_0..=Φ_order` of the phase at the first well,
/// solving `γ^{2/(k+2)} ν(ζ₀ + iγ^{−1/(k+2)}Φ′) = γ₀^{2/(k+2)} ν(ζ₀)` order by
/// order on the branch `Φ″(0) > 0`. `band_taylor[j] = ν^{(j)}(ζ₀)/j!`.
pub fn eikonal_taylor(k: u32, well: &WellProfile, band_taylor: &[f64], order: usize) -> Result<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    if order < 2 {
        return Err(Error::InvalidInput("eikonal order must be at least 2".into()));
    }
    if band_taylor.len() < order + 1 {
        return Err(Error::InvalidInput(format!(
            "order {order} needs band Taylor data through degree {order}, have {}",
            band_taylor.len().saturating_sub(1)
        )));
    }
    let b2 = band_taylor[2];
    if !(b2 > 0.0) {
        return Err(Error::InvalidWell("ν″(ζ₀) must be positive".into()));
    }
    let kk = k as f64 + 2.0;
    let p = 2.0 / kk;
    let m = well.minima[0];
    let g = poly_shift(&well.gamma, m.s);
    let len = order + 1;
    // F(s) = ν₀ (γ₀^p γ^{−p} − 1)
    let gmp = series_pow(&g, -p, len);
    let mut f: Vec<f64> = gmp.iter().map(|c| band_taylor[0] * well.gamma0.powf(p) * c).collect();
    f[0] -= band_taylor[0];
    f[0] = 0.0;
    if f[2] > 0.0 {
        return Err(Error::InvalidWell("the well is a maximum of γ".into()));
    }
    let mut phi = vec![zero; len];
    if f[2] == 0.0 {
        if f.iter().all(|&c| c == 0.0) {
            return Ok(phi);
        }
        return Err(Error::InvalidWell(
            "degenerate well: branch selection is ambiguous".into(),
        ));
    }
    // w(s) = iγ^{−1/(k+2)} Φ′(s) = Σ_{m≥1} w_m s^m, solving Σ_{j≥2} b_j w^j = F
    // (ν′(ζ₀) = 0 is used exactly).
    let mut w = vec![zero; len];
    w[1] = Complex64::new(0.0, (-f[2] / b2).sqrt());
    for mdeg in 2..order {
        let acc = eval_series_poly(band_taylor, &w, len);
        let rhs = Complex64::new(f[mdeg + 1], 0.0) - acc[mdeg + 1];
        w[mdeg] = rhs / (w[1] * (2.0 * b2));
    }
    // Φ′ = −i γ^{1/(k+2)} w
    let gq: Vec<Complex64> = series_pow(&g, 1.0 / kk, len)
        .into_iter()
        .map(|x| Complex64::new(x, 0.0))
        .collect();
    let dphi: Vec<Complex64> = series_mul(&gq, &w, len)
        .into_iter()
        .map(|z| z * Complex64::new(0.0, -1.0))
        .collect();
    for i in 1..len {
        phi[i] = dphi[i - 1] / i as f64;
    }
    Ok(phi)
}

/// `Σ_{j≥2} b_j w^j` as a truncated series.
fn eval_series_poly(b: &[f64], w: &[Complex64], len: usize) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = vec![zero; len];
    let mut wp = series_mul(w, w, len);
    for (j, &bj) in b.iter().enumerate().skip(2).take(len.saturating_sub(1)) {
        for (a, c) in acc.iter_mut().zip(&wp) {
            *a += *c * bj;
        }
        if j + 1 < b.len() {
            wp = series_mul(&wp, w, len);
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Agmon distance

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum AgmonVariant {
    Single,
    /// Two symmetric wells glued with cutoffs switching over `[δ/2, δ]`.
    Double {
        delta: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgmonWeight {
    pub s_samples: Vec<f64>,
    pub z_samples: Vec<f64>,
    pub wells: Vec<f64>,
}

/// `C^∞` step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// `χ_{δ,−}`: 1 for `s ≤ δ/2`, 0 for `s ≥ δ`. `χ_{δ,+}(s) = χ_{δ,−}(−s)`.
pub fn cutoff_minus(delta: f64, s: f64) -> f64 {
    1.0 - smooth_step((s - 0.5 * delta) / (0.5 * delta))
}

/// `z(s) = |∫_{s₀}^s √(γ^{2/(k+2)} − γ₀^{2/(k+2)})|`, or the two-well gluing.
pub fn agmon_weight(k: u32, well: &WellProfile, s_grid: &[f64], variant: AgmonVariant) -> Result<AgmonWeight> {
    let p = 2.0 / (k as f64 + 2.0);
    let g0p = well.gamma0.powf(p);
    let radicand = |s: f64| well.eval(s).powf(p) - g0p;
    for &s in s_grid {
        let r = radicand(s);
        if r < -1e-12 * g0p {
            return Err(Error::InvalidWell(format!("γ({s}) dips below γ₀")));
        }
    }
    let integrand = |s: f64| radicand(s).max(0.0).sqrt();
    let one_well = |s0: f64, s: f64| adaptive_trapezoid(integrand, s0, s, 1e-10).abs();
    let (z, wells) = match variant {
        AgmonVariant::Single => {
            if well.minima.len() != 1 {
                return Err(Error::InvalidWell(format!(
                    "{} minima for the single variant",
                    well.minima.len()
                )));
            }
            let s0 = well.minima[0].s;
            (s_grid.iter().map(|&s| one_well(s0, s)).collect::<Vec<_>>(), vec![s0])
        }
        AgmonVariant::Double { delta } => {
            if well.minima.len() != 2 || (well.minima[0].s + well.minima[1].s).abs() > 1e-8 {
                return Err(Error::InvalidWell("double variant needs two symmetric minima".into()));
            }
            let (sm, sp) = (well.minima[0].s, well.minima[1].s);
            if !(delta > 0.0 && delta < sp) {
                return Err(Error::InvalidInput(format!("δ = {delta} must lie in (0, {sp})")));
            }
            let z = s_grid
                .iter()
                .map(|&s| {
                    let cm = cutoff_minus(delta, s);
                    let cp = cutoff_minus(delta, -s);
                    let mut v = 0.0;
                    if cm > 0.0 {
                        v += cm * one_well(sm, s);
                    }
                    if cp > 0.0 {
                        v += cp * one_well(sp, s);
                    }
                    v
                })
                .collect();
            (z, vec![sm, sp])
        }
    };
    Ok(AgmonWeight {
        s_samples: s_grid.to_vec(),
        z_samples: z,
        wells,
    })
}

impl AgmonWeight {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "s,z")?;
        for (s, z) in self.s_samples.iter().zip(&self.z_samples) {
            writeln!(f, "{s:.10e},{z:.10e}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Boundary curvature

/// Curvature of the boundary `x₂ = −f(x₁)` sampled in arclength `σ` (measured
/// from `x₁ = 0`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureProfile {
    /// Ascending coefficients of `f`.
    pub f: Vec<f64>,
    pub sigma: Vec<f64>,
    pub x: Vec<f64>,
    pub kappa: Vec<f64>,
    pub kappa_max: f64,
    /// Arclength positions of the curvature maxima.
    pub sigma_max: Vec<f64>,
    /// `−κ″` at the maxima, in arclength.
    pub k2: f64,
}

/// Boundary graph `x₂ = −f(x₁)` with polynomial `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGraph {
    pub f: Vec<f64>,
}

impl BoundaryGraph {
    pub fn parabola(c: f64) -> Self {
        BoundaryGraph { f: vec![0.0, 0.0, c] }
    }

    /// `x₂ = −(1 − x₁²)²`.
    pub fn two_bumps() -> Self {
        BoundaryGraph {
            f: vec![1.0, 0.0, -2.0, 0.0, 1.0],
        }
    }

    pub fn f(&self, x: f64) -> f64 {
        poly_eval(&self.f, x)
    }

    pub fn df(&self, x: f64) -> f64 {
        poly_eval(&poly_derivative(&self.f), x)
    }

    pub fn d2f(&self, x: f64) -> f64 {
        poly_eval(&poly_derivative(&poly_derivative(&self.f)), x)
    }

    pub fn curvature_at_x(&self, x: f64) -> f64 {
        let d = self.df(x);
        self.d2f(x) / (1.0 + d * d).powf(1.5)
    }

    pub fn arclength(&self, x: f64) -> f64 {
        let d1 = poly_derivative(&self.f);
        gauss_legendre(|t| (1.0 + poly_eval(&d1, t).powi(2)).sqrt(), 0.0, x, 0.02)
    }

    /// Inverse of [`arclength`](Self::arclength) by safeguarded Newton.
    pub fn x_of_sigma(&self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = if sigma > 0.0 { (0.0, sigma) } else { (sigma, 0.0) };
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let r = self.arclength(x) - sigma;
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.df(x);
            let mut nx = x - r / (1.0 + d * d).sqrt();
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() <= 1e-15 * (1.0 + x.abs()) {
                return nx;
            }
            x = nx;
        }
        x
    }

    pub fn curvature_at_sigma(&self, sigma: f64) -> f64 {
        self.curvature_at_x(self.x_of_sigma(sigma))
    }
}

/// Samples `κ(σ)` and measures `κ_max` and `k₂ = −κ″` (5-point differences
/// in arclength) at the maxima.
pub fn curvature_profile(curve: &BoundaryGraph, sigma_grid: &[f64]) -> Result<CurvatureProfile> {
    let x: Vec<f64> = sigma_grid.iter().map(|&s| curve.x_of_sigma(s)).collect();
    let kappa: Vec<f64> = x.iter().map(|&v| curve.curvature_at_x(v)).collect();
    // Maxima of κ(x): roots of κ′ from sign changes on a fine x-scan.
    let (xa, xb) = (
        x.iter().copied().fold(f64::INFINITY, f64::min),
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let dk = |t: f64| {
        let e = 1e-5;
        (curve.curvature_at_x(t + e) - curve.curvature_at_x(t - e)) / (2.0 * e)
    };
    let n = 4000;
    let mut maxima = Vec::new();
    let mut prev = dk(xa);
    for i in 1..=n {
        let t = xa + (xb - xa) * i as f64 / n as f64;
        let cur = dk(t);
        if prev > 0.0 && cur <= 0.0 {
            let (mut lo, mut hi) = (t - (xb - xa) / n as f64, t);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if dk(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            maxima.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    // Even profiles: snap a maximum at the origin exactly.
    if curve.f.iter().skip(1).step_by(2).all(|&c| c == 0.0) {
        for m in maxima.iter_mut() {
            if m.abs() < 1e-6 {
                *m = 0.0;
            }
        }
    }
    let kmax = maxima
        .iter()
        .map(|&t| curve.curvature_at_x(t))
        .fold(f64::NEG_INFINITY, f64::max);
    if !kmax.is_finite() {
        return Err(Error::InvalidInput(
            "curvature has no interior maximum on the grid".into(),
        ));
    }
    let top: Vec<f64> = maxima
        .into_iter()
        .filter(|&t| (curve.curvature_at_x(t) - kmax).abs() <= 1e-9 * kmax.abs())
        .collect();
    let sigma_max: Vec<f64> = top.iter().map(|&t| curve.arclength(t)).collect();
    let s0 = sigma_max[0];
    let d = 1e-3;
    let kf = |s: f64| curve.curvature_at_sigma(s);
    let k2 = -(-kf(s0 + 2.0 * d) + 16.0 * kf(s0 + d) - 30.0 * kf(s0) + 16.0 * kf(s0 - d) - kf(s0 - 2.0 * d))
        / (12.0 * d * d);
    Ok(CurvatureProfile {
        f: curve.f.clone(),
        sigma: sigma_grid.to_vec(),
        x,
        kappa,
        kappa_max: kmax,
        sigma_max,
        k2,
    })
}

/// Curvature of `x₂ = −c x₁²` in arclength.
pub fn curvature_profile_parabola(c: f64, sigma_grid: &[f64]) -> Result<CurvatureProfile> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!(
            "parabola coefficient {c} must be positive"
        )));
    }
    curvature_profile(&BoundaryGraph::parabola(c), sigma_grid)
}

// ---------------------------------------------------------------------------
// Camel expansion

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CamelExpansion {
    pub theta0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub nu2: f64,
    pub kappa_max: f64,
    pub k2: f64,
    /// `(λ₀, λ₁, λ₂, λ₃(n))` for `n = 1..=n_max`.
    pub lambda_terms: Vec<[f64; 4]>,
    pub phi2: f64,
    pub phi_sigma: Vec<f64>,
    pub phi_values: Vec<f64>,
}

/// Coefficients of `λ/ℏ = λ₀ + λ₁ℏ^{1/4} + λ₂ℏ^{1/2} + λ₃ℏ^{3/4} + …` and
/// the phase `Φ(σ) = √(2C₁/ν″)|∫₀^σ √(κ(0) − κ)|` when a profile is given
/// (the profile must contain `σ = 0`, where `κ` is maximal).
pub fn camel_expansion(
    band0: &BandMinimum,
    c1: f64,
    kappa_max: f64,
    k2: f64,
    n_max: usize,
    profile: Option<(&[f64], &[f64])>,
) -> Result<CamelExpansion> {
    if band0.k != 0 {
        return Err(Error::InvalidInput("camel expansion needs the k = 0 band".into()));
    }
    if !(k2 > 0.0) || !(kappa_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need k2 > 0 and κ_max > 0 (got {k2}, {kappa_max})"
        )));
    }
    let theta0 = band0.nu0;
    let l3 = c1 * theta0.powf(0.25) * (1.5 * k2).sqrt();
    let lambda_terms = (1..=n_max)
        .map(|n| [theta0, 0.0, -c1 * kappa_max, (2 * n - 1) as f64 * l3])
        .collect();
    let phi2 = (k2 * c1 / band0.nu2).sqrt();
    let (phi_sigma, phi_values) = match profile {
        None => (Vec::new(), Vec::new()),
        Some((sig, kap)) => {
            if sig.len() != kap.len() || sig.len() < 3 {
                return Err(Error::InvalidInput("profile samples have mismatched lengths".into()));
            }
            let i0 = sig
                .iter()
                .position(|&s| s == 0.0)
                .ok_or_else(|| Error::InvalidInput("profile grid must contain σ = 0".into()))?;
            let k0 = kap[i0];
            if let Some(i) = kap.iter().position(|&v| v > k0 + 1e-12 * k0.abs()) {
                return Err(Error::InvalidInput(format!(
                    "κ({}) = {} exceeds κ(0) = {k0}: not a maximum",
                    sig[i], kap[i]
                )));
            }
            let root: Vec<f64> = kap.iter().map(|&v| (k0 - v).max(0.0).sqrt()).collect();
            let c = (2.0 * c1 / band0.nu2).sqrt();
            let mut phi = vec![0.0; sig.len()];
            for i in i0 + 1..sig.len() {
                phi[i] = phi[i - 1] + 0.5 * (sig[i] - sig[i - 1]) * (root[i] + root[i - 1]);
            }
            for i in (0..i0).rev() {
                phi[i] = phi[i + 1] + 0.5 * (sig[i + 1] - sig[i]) * (root[i] + root[i + 1]);
            }
            (sig.to_vec(), phi.into_iter().map(|p| c * p).collect())
        }
    };
    Ok(CamelExpansion {
        theta0,
        c1,
        nu2: band0.nu2,
        kappa_max,
        k2,
        lambda_terms,
        phi2,
        phi_sigma,
        phi_values,
    })
}

/// Agmon distance `S = √(2C₁/ν″) ∫ √(κ_max − κ) dσ` between the outermost
/// curvature maxima. A symmetric two-bump boundary splits the lowest pair by
/// `e^{−S/ℏ^{1/4}}` up to a prefactor.
pub fn camel_tunneling_action(curve: &BoundaryGraph, profile: &CurvatureProfile, c1: f64, nu2: f64) -> Result<f64> {
    if profile.sigma_max.len() < 2 {
        return Err(Error::InvalidInput("need two curvature maxima".into()));
    }
    if !(c1 > 0.0 && nu2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need C1 > 0 and nu2 > 0 (got {c1}, {nu2})"
        )));
    }
    let xa = curve.x_of_sigma(profile.sigma_max[0]);
    let xb = curve.x_of_sigma(*profile.sigma_max.last().unwrap());
    let kmax = profile.kappa_max;
    let integrand = |x: f64| (kmax - curve.curvature_at_x(x)).max(0.0).sqrt() * (1.0 + curve.df(x).powi(2)).sqrt();
    Ok((2.0 * c1 / nu2).sqrt() * gauss_legendre(integrand, xa, xb, 0.01))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_matches_evaluation() {
        let c = [2.0, 0.0, -2.0, 0.0, 1.0];
        let s = poly_shift(&c, 1.0);
        for x in [-0.3, 0.0, 0.7] {
            assert!((poly_eval(&s, x) - poly_eval(&c, 1.0 + x)).abs() < 1e-13);
        }
        assert!(s[1].abs() < 1e-14);
    }

    #[test]
    fn binomial_series_matches_powf() {
        let c = [1.0, 0.2, 4.0];
        let p = series_pow(&c, -2.0 / 3.0, 12);
        let x = 0.01;
        let direct = poly_eval(&c, x).powf(-2.0 / 3.0);
        assert!((poly_eval(&p, x) - direct).abs() < 1e-14);
    }

    #[test]
    fn double_well_minima() {
        let w = WellProfile::double();
        assert_eq!(w.minima.len(), 2);
        assert!((w.minima[1].s - 1.0).abs() < 1e-12);
        assert!((w.minima[0].gamma2 - 8.0).abs() < 1e-10);
        assert!((w.gamma0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_gamma_is_rejected() {
        assert!(WellProfile::new(vec![-0.1, 0.0, 1.0], (-1.0, 1.0)).is_err());
    }

    #[test]
    fn smooth_cutoffs() {
        assert_eq!(cutoff_minus(0.5, 0.2), 1.0);
        assert_eq!(cutoff_minus(0.5, 0.6), 0.0);
        let mid = cutoff_minus(0.5, 0.375);
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parabola_curvature_closed_form() {
        let sig: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.05).collect();
        let p = curvature_profile_parabola(4.0, &sig).unwrap();
        assert!((p.kappa_max - 8.0).abs() < 1e-12);
        // κ″(0) by the chain rule: d²κ/dσ² = κ_xx at x = 0 since dσ/dx = 1, σ_xx = 0.
        assert!((p.k2 - 24.0 * 64.0).abs() < 1e-3 * 1536.0, "{}", p.k2);
        for (i, s) in sig.iter().enumerate() {
            let j = sig.len() - 1 - i;
            assert!((p.kappa[i] - p.kappa[j]).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn two_bump_maxima_are_symmetric() {
        let c = BoundaryGraph::two_bumps();
        let sig: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.05).collect();
        let p = curvature_profile(&c, &sig).unwrap();
        // κ(±1) = 8 but κ′(±1) ≠ 0; the maxima sit slightly outside.
        assert!(p.kappa_max > 8.0 && p.kappa_max < 8.5, "{}", p.kappa_max);
        assert_eq!(p.sigma_max.len(), 2);
        assert!((c.curvature_at_x(1.0) - 8.0).abs() < 1e-12);
        assert!((p.sigma_max[0] + p.sigma_max[1]).abs() < 1e-9);
    }

    #[test]
    fn tunneling_action_matches_arclength_trapezoid() {
        let curve = BoundaryGraph::two_bumps();
        let grid: Vec<f64> = (0..=400).map(|i| -3.0 + 6.0 * i as f64 / 400.0).collect();
        let prof = curvature_profile(&curve, &grid).unwrap();
        let s = camel_tunneling_action(&curve, &prof, 0.25, 1.2).unwrap();
        let (a, b) = (prof.sigma_max[0], prof.sigma_max[1]);
        let n = 20000;
        let ds = (b - a) / n as f64;
        let samples: Vec<f64> = (0..=n)
            .map(|i| {
                (prof.kappa_max - curve.curvature_at_sigma(a + ds * i as f64))
                    .max(0.0)
                    .sqrt()
            })
            .collect();
        let oracle = (2.0 * 0.25 / 1.2f64).sqrt() * crate::quad::trapezoid(&samples, ds);
        assert!((s - oracle).abs() < 1e-6 * oracle, "{s} vs {oracle}");
        assert!(camel_tunneling_action(
            &BoundaryGraph::parabola(4.0),
            &curvature_profile_parabola(4.0, &grid).unwrap(),
            0.25,
            1.2
        )
        .is_err());
    }
}
