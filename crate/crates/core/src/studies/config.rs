//! Study configuration. The JSON config files map field-for-field onto
//! [`SweepConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assemble2d::Grid2D;
use crate::error::{Error, Result};
use crate::wkb::{BoundaryGraph, WellProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StudyKind {
    #[serde(rename = "band-table")]
    BandTable,
    #[serde(rename = "simple-well")]
    SimpleWell,
    #[serde(rename = "double-well")]
    DoubleWell,
    #[serde(rename = "camel-1bump")]
    Camel1Bump,
    #[serde(rename = "camel-2bump")]
    Camel2Bump,
    #[serde(rename = "agmon")]
    Agmon,
    #[serde(rename = "domain-convergence")]
    DomainConvergence,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::BandTable => "band-table",
            StudyKind::SimpleWell => "simple-well",
            StudyKind::DoubleWell => "double-well",
            StudyKind::Camel1Bump => "camel-1bump",
            StudyKind::Camel2Bump => "camel-2bump",
            StudyKind::Agmon => "agmon",
            StudyKind::DomainConvergence => "domain-convergence",
        }
    }

    fn is_camel(self) -> bool {
        matches!(self, StudyKind::Camel1Bump | StudyKind::Camel2Bump)
    }
}

/// Box `(−a, a) × (0, b)` (half plane) or `(−a, a) × (−b, b)` and the fine
/// resolution. With Richardson refinement the coarse level uses
/// `((nx + 1)/2, (ny + 1)/2)`, so both counts must be odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTemplate {
    pub a: f64,
    pub b: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellSpec {
    /// Ascending coefficients of `γ(s)`.
    pub gamma: Vec<f64>,
    pub s_range: (f64, f64),
}

impl WellSpec {
    pub fn simple() -> Self {
        WellSpec {
            gamma: vec![1.0, 0.0, 4.0],
            s_range: (-3.0, 3.0),
        }
    }

    pub fn double() -> Self {
        WellSpec {
            gamma: vec![2.0, 0.0, -2.0, 0.0, 1.0],
            s_range: (-3.0, 3.0),
        }
    }

    pub fn profile(&self) -> Result<WellProfile> {
        WellProfile::new(self.gamma.clone(), self.s_range)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSettings {
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub n_zeta: usize,
    /// Search interval for the band minimum.
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgmonSettings {
    /// Cutoff width of the two-well Agmon weight.
    pub delta: f64,
    /// Distances `|s − s_well|` over which the ratio is checked.
    pub window: (f64, f64),
    /// Required lower bound of `w/z` on the window.
    pub eps0: f64,
    /// Directory holding a vector dump from an earlier run; the study solves
    /// afresh when absent.
    #[serde(default)]
    pub vectors: Option<PathBuf>,
}

impl Default for AgmonSettings {
    fn default() -> Self {
        AgmonSettings {
            delta: 0.2,
            window: (0.2, 0.8),
            eps0: 0.2,
            vectors: None,
        }
    }
}

fn default_seed() -> u64 {
    0x5eed
}

fn default_tol() -> f64 {
    1e-10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub study_kind: StudyKind,
    pub k: u32,
    /// Semiclassical parameters, strictly decreasing. For the camel studies
    /// these are the `ℏ` of `(ℏD − A)²`.
    pub h_list: Vec<f64>,
    pub grid: GridTemplate,
    pub n_eigs: usize,
    #[serde(default)]
    pub well: Option<WellSpec>,
    /// Ascending coefficients of `f` for the boundary `x₂ = −f(x₁)`.
    #[serde(default)]
    pub curve: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_true")]
    pub richardson: bool,
    /// The box half-width used at `h` is `a·h^a_exponent`.
    #[serde(default)]
    pub a_exponent: f64,
    #[serde(default)]
    pub emit_plots: bool,
    #[serde(default)]
    pub dump_vectors: bool,
    /// Restricts the fits to `h` in `[lo, hi]`.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    /// Double well: `h` at which eigenvector symmetry is checked.
    #[serde(default)]
    pub parity_h: Option<f64>,
    #[serde(default)]
    pub agmon: Option<AgmonSettings>,
    /// Domain convergence: `(a, b)` of the nested boxes, at the spacing of
    /// `grid`.
    #[serde(default)]
    pub boxes: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub band: Option<BandSettings>,
}

/// `1/h` running from `first` to `last` in steps of `step`, as a decreasing
/// list of `h`. Parses `"first:step:last"`.
pub fn parse_inverse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidInput(format!("range {spec:?}: {e}")))?;
    let [first, step, last] = parts[..] else {
        return Err(Error::InvalidInput(format!("range {spec:?} is not first:step:last")));
    };
    if !(first > 0.0 && step > 0.0 && last >= first) {
        return Err(Error::InvalidInput(format!(
            "range {spec:?} must be positive and increasing"
        )));
    }
    let n = ((last - first) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| 1.0 / (first + step * i as f64)).collect())
}

fn inverse(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| 1.0 / v).collect()
}

impl SweepConfig {
    /// Settings that reproduce the reference runs for `kind`.
    pub fn preset(kind: StudyKind, k: u32) -> Self {
        let mut c = SweepConfig {
            study_kind: kind,
            k,
            h_list: Vec::new(),
            grid: GridTemplate {
                a: 1.5,
                b: 6.0,
                nx: 301,
                ny: 301,
            },
            n_eigs: 1,
            well: None,
            curve: None,
            output_dir: PathBuf::from("out").join(kind.name()),
            seed: default_seed(),
            tol: default_tol(),
            richardson: true,
            a_exponent: 0.0,
            emit_plots: false,
            dump_vectors: false,
            fit_window: None,
            parity_h: None,
            agmon: None,
            boxes: None,
            band: None,
        };
        match kind {
            StudyKind::BandTable => {
                c.richardson = false;
                c.band = Some(BandSettings {
                    zeta_min: -1.5,
                    zeta_max: 3.0,
                    n_zeta: 91,
                    bracket: crate::band1d::default_bracket(k),
                });
            }
            StudyKind::SimpleWell => {
                c.h_list = inverse(&[10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 60.0]);
                c.n_eigs = 3;
                c.well = Some(WellSpec::simple());
                if k == 0 {
                    c.grid = GridTemplate {
                        a: 1.5,
                        b: 8.0,
                        nx: 301,
                        ny: 201,
                    };
                }
            }
            StudyKind::DoubleWell | StudyKind::Agmon => {
                c.n_eigs = 2;
                c.well = Some(WellSpec::double());
                c.parity_h = Some(0.1);
                // Gaps reach 1e-12; the noise floor is 100 × tol.
                c.tol = 1e-11;
                if k == 0 {
                    c.h_list = inverse(&[6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0]);
                    c.grid = GridTemplate {
                        a: 2.2,
                        b: 7.0,
                        nx: 201,
                        ny: 121,
                    };
                } else {
                    c.h_list = inverse(&[8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 26.0, 30.0]);
                    c.grid = GridTemplate {
                        a: 2.2,
                        b: 6.0,
                        nx: 201,
                        ny: 161,
                    };
                }
                if kind == StudyKind::Agmon {
                    c.h_list = vec![1.0 / 15.0];
                    c.richardson = false;
                    c.parity_h = None;
                    c.agmon = Some(AgmonSettings::default());
                }
            }
            StudyKind::Camel1Bump => {
                c.k = 0;
                c.h_list = (0..13).map(|j| 1e-3 * 10f64.powf(-j as f64 / 3.0)).collect();
                c.curve = Some(BoundaryGraph::parabola(4.0).f);
                c.grid = GridTemplate {
                    a: 1.6,
                    b: 10.0,
                    nx: 121,
                    ny: 241,
                };
                c.a_exponent = 0.125;
            }
            StudyKind::Camel2Bump => {
                c.k = 0;
                c.h_list = inverse(&[10.0, 15.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]);
                c.n_eigs = 2;
                c.curve = Some(BoundaryGraph::two_bumps().f);
                c.grid = GridTemplate {
                    a: 1.6,
                    b: 10.0,
                    nx: 321,
                    ny: 201,
                };
            }
            StudyKind::DomainConvergence => {
                c.h_list = vec![1.0 / 20.0];
                c.richardson = false;
                c.well = Some(WellSpec::simple());
                c.grid = GridTemplate {
                    a: 1.0,
                    b: 4.0,
                    nx: 101,
                    ny: 101,
                };
                c.boxes = Some(vec![(1.0, 4.0), (1.5, 6.0), (2.0, 8.0)]);
            }
        }
        c
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: SweepConfig = serde_json::from_reader(std::fs::File::open(path)?)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.h_list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return bad("h_list entries must be positive and finite".into());
        }
        if self.h_list.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("h_list must be strictly decreasing".into());
        }
        if self.n_eigs == 0 {
            return bad("n_eigs must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if self.study_kind.is_camel() && self.k != 0 {
            return bad("the camel studies use the half-plane model (k = 0)".into());
        }
        let g = self.grid;
        if !(g.a > 0.0 && g.b > 0.0) || g.nx < 8 || g.ny < 8 {
            return bad(format!("grid template {g:?} is degenerate"));
        }
        if self.richardson && (g.nx.is_multiple_of(2) || g.ny.is_multiple_of(2) || g.nx < 17 || g.ny < 17) {
            return bad(format!(
                "Richardson refinement needs odd nx, ny ≥ 17 (got {} x {})",
                g.nx, g.ny
            ));
        }
        if let Some((lo, hi)) = self.fit_window {
            if !(lo <= hi) {
                return bad(format!("fit window ({lo}, {hi}) is empty"));
            }
        }
        let need = |present: bool, what: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{} needs {what}", self.study_kind.name())))
            }
        };
        let nonempty_h = |this: &Self| need(!this.h_list.is_empty(), "a non-empty h_list");
        match self.study_kind {
            StudyKind::BandTable => {
                need(self.band.is_some(), "band settings")?;
                if self.k > 1 {
                    return bad("band tables are tabulated for k = 0 and 1".into());
                }
            }
            StudyKind::SimpleWell => {
                nonempty_h(self)?;
                let w = self.well_profile()?;
                if w.minima.len() != 1 {
                    return bad(format!("simple-well needs one minimum, found {}", w.minima.len()));
                }
            }
            StudyKind::DoubleWell | StudyKind::Agmon => {
                nonempty_h(self)?;
                let w = self.well_profile()?;
                if w.minima.len() != 2 || !w.is_even() {
                    return bad("double-well needs an even profile with two minima".into());
                }
                if self.n_eigs < 2 {
                    return bad("double-well needs n_eigs ≥ 2".into());
                }
                if self.study_kind == StudyKind::Agmon {
                    need(self.agmon.is_some(), "agmon settings")?;
                    if self.h_list.len() != 1 {
                        return bad("agmon runs at a single h".into());
                    }
                }
            }
            StudyKind::Camel1Bump | StudyKind::Camel2Bump => {
                nonempty_h(self)?;
                need(self.curve.as_ref().is_some_and(|f| !f.is_empty()), "a boundary curve")?;
                if self.study_kind == StudyKind::Camel2Bump && self.n_eigs < 2 {
                    return bad("camel-2bump needs n_eigs ≥ 2".into());
                }
            }
            StudyKind::DomainConvergence => {
                self.well_profile()?;
                if self.h_list.len() != 1 {
                    return bad("domain-convergence runs at a single h".into());
                }
                let boxes = self.boxes.as_deref().unwrap_or_default();
                if boxes.len() < 2 {
                    return bad("domain-convergence needs at least two boxes".into());
                }
                if boxes.windows(2).any(|w| !(w[1].0 >= w[0].0 && w[1].1 >= w[0].1)) {
                    return bad("boxes must be nested (a and b non-decreasing)".into());
                }
            }
        }
        Ok(())
    }

    pub fn well_profile(&self) -> Result<WellProfile> {
        self.well
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("{} needs a well profile", self.study_kind.name())))?
            .profile()
    }

    pub fn boundary(&self) -> Result<BoundaryGraph> {
        let f = self
            .curve
            .clone()
            .ok_or_else(|| Error::InvalidInput(format!("{} needs a boundary curve", self.study_kind.name())))?;
        Ok(BoundaryGraph { f })
    }

    /// Fine grid at `h`: half strip for `k = 0`, full box otherwise.
    pub fn grid_at(&self, h: f64) -> Result<Grid2D> {
        let g = self.grid;
        let a = g.a * h.powf(self.a_exponent);
        if self.k == 0 {
            Grid2D::half_strip(a, g.b, g.nx, g.ny)
        } else {
            Grid2D::dirichlet_box(a, g.b, g.nx, g.ny)
        }
    }

    pub fn in_fit_window(&self, h: f64) -> bool {
        self.fit_window.is_none_or(|(lo, hi)| h >= lo && h <= hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for kind in [
            StudyKind::BandTable,
            StudyKind::SimpleWell,
            StudyKind::DoubleWell,
            StudyKind::Camel1Bump,
            StudyKind::Camel2Bump,
            StudyKind::Agmon,
            StudyKind::DomainConvergence,
        ] {
            for k in [0, 1] {
                SweepConfig::preset(kind, k).validate().unwrap();
            }
        }
    }

    #[test]
    fn h_list_must_decrease() {
        let mut c = SweepConfig::preset(StudyKind::SimpleWell, 1);
        c.h_list = vec![0.1, 0.05, 0.05];
        assert!(c.validate().is_err());
        c.h_list = vec![0.05, 0.1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_well_is_reported() {
        let mut c = SweepConfig::preset(StudyKind::DoubleWell, 0);
        c.well = None;
        assert!(matches!(c.validate(), Err(Error::InvalidInput(_))));
        c.well = Some(WellSpec::simple());
        assert!(c.validate().is_err());
    }

    #[test]
    fn inverse_range() {
        let h = parse_inverse_range("10:10:60").unwrap();
        assert_eq!(h.len(), 6);
        assert_eq!(h[0], 0.1);
        assert!((1.0 / h[5] - 60.0).abs() < 1e-12);
        assert!(parse_inverse_range("10:0:60").is_err());
        assert!(parse_inverse_range("10:60").is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = SweepConfig::preset(StudyKind::Agmon, 0);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"study_kind\":\"agmon\""));
        let back: SweepConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
