//! Least-squares fits used by the studies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `y = A x^r`
    PowerLaw,
    /// `ln y = ln A − c h^{−p}`
    ExpRate,
    /// `y ≈ C`
    Plateau,
    /// `y = Σ c_j x^{p_j}`
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<FitParam>,
    pub r_squared: f64,
    /// Range of the abscissa actually used (`h` for the sweeps).
    pub window: [f64; 2],
    pub n_points: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

fn param(name: &str, value: f64) -> FitParam {
    FitParam {
        name: name.to_string(),
        value,
    }
}

fn window(xs: &[f64]) -> [f64; 2] {
    [
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ]
}

fn check(xs: &[f64], ys: &[f64], need: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "{} abscissae for {} values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < need {
        return Err(Error::InsufficientRange(format!(
            "{} usable points, need at least {need}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite data in fit".into()));
    }
    Ok(())
}

/// Linear least squares `y ≈ X c` through the SVD; returns `(c, R²)`.
fn lstsq(design: DMatrix<f64>, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let yv = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    let c = svd
        .solve(&yv, 1e-14)
        .map_err(|e| Error::InvalidInput(format!("least squares failed: {e}")))?;
    let res = &design * &c - &yv;
    let mean = yv.mean();
    let ss_tot: f64 = yv.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res = res.norm_squared();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok((c.iter().copied().collect(), r2))
}

/// `y = A x^r` by a line in log-log coordinates. Needs `x, y > 0`.
pub fn fit_power(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    check(xs, ys, MIN_POINTS)?;
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return Err(Error::InvalidInput("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let design = DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { 1.0 } else { lx[i] });
    let (c, r2) = lstsq(design, &ly)?;
    Ok(FitResult {
        model: FitModel::PowerLaw,
        params: vec![param("A", c[0].exp()), param("r", c[1])],
        r_squared: r2,
        window: window(xs),
        n_points: xs.len(),
    })
}

/// `ln gap = ln A − c/h`.
pub fn fit_exp_rate(h_list: &[f64], gaps: &[f64]) -> Result<FitResult> {
    fit_exp_rate_pow(h_list, gaps, 1.0)
}

/// `ln gap = ln A − c h^{−p}`.
pub fn fit_exp_rate_pow(h_list: &[f64], gaps: &[f64], p: f64) -> Result<FitResult> {
    check(h_list, gaps, MIN_POINTS)?;
    if h_list.iter().chain(gaps).any(|&v| v <= 0.0) {
        return Err(Error::InvalidInput("exp-rate fit needs positive h and gaps".into()));
    }
    let design = DMatrix::from_fn(h_list.len(), 2, |i, j| if j == 0 { 1.0 } else { -h_list[i].powf(-p) });
    let ly: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let (c, r2) = lstsq(design, &ly)?;
    Ok(FitResult {
        model: FitModel::ExpRate,
        params: vec![param("A", c[0].exp()), param("c", c[1]), param("p", p)],
        r_squared: r2,
        window: window(h_list),
        n_points: h_list.len(),
    })
}

/// Mean of `values` over the window; `r_squared` is the flatness
/// `1 − var/mean²` and `spread` the max − min.
pub fn fit_plateau(h_list: &[f64], values: &[f64]) -> Result<FitResult> {
    check(h_list, values, MIN_POINTS)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let spread = window(values);
    let flat = if mean != 0.0 {
        (1.0 - var / (mean * mean)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(FitResult {
        model: FitModel::Plateau,
        params: vec![param("C", mean), param("spread", spread[1] - spread[0])],
        r_squared: flat,
        window: window(h_list),
        n_points: values.len(),
    })
}

/// `y = Σ c_j x^{p_j}`; parameters are named `c<p_j>`. `window` reports the
/// range of `h`, passed separately since `x` may be a transformed variable.
pub fn fit_poly(h_list: &[f64], xs: &[f64], ys: &[f64], powers: &[f64]) -> Result<FitResult> {
    check(xs, ys, MIN_POINTS.max(powers.len() + 1))?;
    let design = DMatrix::from_fn(xs.len(), powers.len(), |i, j| xs[i].powf(powers[j]));
    let (c, r2) = lstsq(design, ys)?;
    Ok(FitResult {
        model: FitModel::Polynomial,
        params: powers
            .iter()
            .zip(&c)
            .map(|(p, v)| param(&format!("c{p}"), *v))
            .collect(),
        r_squared: r2,
        window: window(h_list),
        n_points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [0.5, 1.0, 2.0, 3.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let f = fit_power(&xs, &ys).unwrap();
        assert!((f.param("r").unwrap() - 2.0).abs() < 1e-12);
        assert!((f.param("A").unwrap() - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_exp_rate() {
        let hs = [1.0 / 6.0, 1.0 / 8.0, 1.0 / 10.0, 1.0 / 12.0, 1.0 / 14.0];
        let gaps: Vec<f64> = hs.iter().map(|h: &f64| 7.0 * (-1.27 / h).exp()).collect();
        let f = fit_exp_rate(&hs, &gaps).unwrap();
        assert!((f.param("c").unwrap() - 1.27).abs() < 1e-6);
        assert_eq!(f.window, [1.0 / 14.0, 1.0 / 6.0]);
    }

    #[test]
    fn too_few_points_are_refused() {
        let r = fit_power(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert!(matches!(r, Err(Error::InsufficientRange(_))));
    }

    #[test]
    fn polynomial_recovers_coefficients() {
        let xs: Vec<f64> = (1..=8).map(|i| 0.02 * i as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| -2.0 * x * x + 10.0 * x.powi(3) - 30.0 * x.powi(4))
            .collect();
        let f = fit_poly(&xs, &xs, &ys, &[2.0, 3.0, 4.0]).unwrap();
        assert!((f.param("c2").unwrap() + 2.0).abs() < 1e-8);
        assert!((f.param("c3").unwrap() - 10.0).abs() < 1e-6);
    }
}
