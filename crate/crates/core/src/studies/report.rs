//! Report types and the files written for each study.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use super::fit::FitResult;
use crate::error::Result;

/// One line of `rows.csv`. With Richardson refinement `lambda` is the
/// extrapolated value, `nx, ny` the fine grid and `residual` the largest
/// certified residual of the two levels. Camel rows hold the eigenvalues of
/// `(ℏD − A)²` itself (`h = ℏ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub study: String,
    pub k: u32,
    pub h: Option<f64>,
    pub n: usize,
    pub lambda: f64,
    pub residual: f64,
    pub nx: usize,
    pub ny: Option<usize>,
    pub a: f64,
    pub b: f64,
}

/// A single eigensolve as it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub a: f64,
    pub b: f64,
    pub dim: usize,
    pub shift: f64,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub measured: f64,
    /// Accepted interval.
    pub expected: (f64, f64),
    pub pass: bool,
    pub note: String,
}

impl Verdict {
    pub fn within(name: &str, measured: f64, lo: f64, hi: f64, note: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            measured,
            expected: (lo, hi),
            pass: measured >= lo && measured <= hi,
            note: note.into(),
        }
    }

    /// `|measured − target| ≤ rel·|target|`.
    pub fn relative(name: &str, measured: f64, target: f64, rel: f64, note: impl Into<String>) -> Self {
        let d = rel * target.abs();
        Self::within(name, measured, target - d, target + d, note)
    }

    pub fn flag(name: &str, pass: bool, measured: f64, note: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            measured,
            expected: (1.0, 1.0),
            pass,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub h: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    /// Column index of the abscissa.
    pub x: usize,
    pub ys: Vec<usize>,
    pub log_x: bool,
    pub log_y: bool,
}

/// A derived data table, written as `<name>.csv` (and `<name>.gp` with
/// plots enabled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub title: String,
    pub columns: Vec<String>,
    pub data: Vec<Vec<f64>>,
    pub plot: PlotSpec,
}

impl Series {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.data.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub version: String,
    pub parallel: bool,
}

impl Default for BuildInfo {
    fn default() -> Self {
        BuildInfo {
            version: env!("CARGO_PKG_VERSION").into(),
            parallel: crate::par::is_parallel(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: SweepConfig,
    pub build: BuildInfo,
    pub rows: Vec<Row>,
    pub solves: Vec<SolveRecord>,
    pub fits: Vec<NamedFit>,
    /// Expansions and constants the measurements are compared with.
    pub predictions: serde_json::Value,
    pub series: Vec<Series>,
    pub verdicts: Vec<Verdict>,
    pub failures: Vec<Failure>,
    pub notes: Vec<String>,
}

impl StudyReport {
    pub fn new(config: &SweepConfig) -> Self {
        StudyReport {
            config: config.clone(),
            build: BuildInfo::default(),
            rows: Vec::new(),
            solves: Vec::new(),
            fits: Vec::new(),
            predictions: serde_json::Value::Null,
            series: Vec::new(),
            verdicts: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn fit(&self, name: &str) -> Option<&FitResult> {
        self.fits.iter().find(|f| f.name == name).map(|f| &f.fit)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn push_fit(&mut self, name: &str, fit: Result<FitResult>) -> Option<FitResult> {
        match fit {
            Ok(f) => {
                self.fits.push(NamedFit {
                    name: name.into(),
                    fit: f.clone(),
                });
                Some(f)
            }
            Err(e) => {
                self.failures.push(Failure {
                    h: None,
                    message: format!("fit {name}: {e}"),
                });
                None
            }
        }
    }

    /// Writes `report.json`, `rows.csv`, one CSV per series and, if
    /// requested, gnuplot scripts. Returns the paths written.
    pub fn write(&self, dir: &Path, emit_plots: bool) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let p = dir.join("report.json");
        serde_json::to_writer_pretty(std::io::BufWriter::new(std::fs::File::create(&p)?), self)?;
        out.push(p);
        let p = dir.join("rows.csv");
        write_rows(&p, &self.rows)?;
        out.push(p);
        for s in &self.series {
            let p = dir.join(format!("{}.csv", s.name));
            write_series(&p, s)?;
            out.push(p);
            if emit_plots {
                let p = dir.join(format!("{}.gp", s.name));
                std::fs::write(&p, gnuplot_script(s))?;
                out.push(p);
            }
        }
        Ok(out)
    }
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record(["study", "k", "h", "n", "lambda", "residual", "nx", "ny", "a", "b"])
            .map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::InvalidInput(format!("csv: {e}"))
}

fn write_series(path: &Path, s: &Series) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&s.columns).map_err(csv_err)?;
    for row in &s.data {
        w.write_record(row.iter().map(|v| format!("{v:.12e}")))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn gnuplot_script(s: &Series) -> String {
    use std::fmt::Write as _;
    let mut g = String::new();
    let _ = writeln!(g, "set datafile separator ','");
    let _ = writeln!(g, "set key autotitle columnhead");
    let _ = writeln!(g, "set title '{}'", s.title.replace('\'', ""));
    let _ = writeln!(g, "set xlabel '{}'", s.columns[s.plot.x]);
    if s.plot.log_x {
        let _ = writeln!(g, "set logscale x");
    }
    if s.plot.log_y {
        let _ = writeln!(g, "set logscale y");
    }
    let curves: Vec<String> = s
        .plot
        .ys
        .iter()
        .map(|&y| format!("'{}.csv' using {}:{} with linespoints", s.name, s.plot.x + 1, y + 1))
        .collect();
    let _ = writeln!(g, "plot {}", curves.join(", \\\n     "));
    let _ = writeln!(g, "pause -1");
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::studies::config::StudyKind;

    #[test]
    fn rows_csv_has_the_fixed_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        let rows = vec![Row {
            study: "simple-well".into(),
            k: 1,
            h: Some(0.1),
            n: 1,
            lambda: 0.675,
            residual: 1e-12,
            nx: 301,
            ny: Some(301),
            a: 1.5,
            b: 6.0,
        }];
        write_rows(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "study,k,h,n,lambda,residual,nx,ny,a,b");
        assert_eq!(read_rows(&p).unwrap(), rows);
        write_rows(&p, &[]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap().trim(),
            "study,k,h,n,lambda,residual,nx,ny,a,b"
        );
    }

    #[test]
    fn report_writes_series_and_scripts() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = StudyReport::new(&crate::studies::SweepConfig::preset(StudyKind::SimpleWell, 1));
        r.series.push(Series {
            name: "demo".into(),
            title: "demo".into(),
            columns: vec!["x".into(), "y".into()],
            data: vec![vec![1.0, 2.0], vec![2.0, 4.0]],
            plot: PlotSpec {
                x: 0,
                ys: vec![1],
                log_x: true,
                log_y: false,
            },
        });
        let paths = r.write(dir.path(), true).unwrap();
        assert_eq!(paths.len(), 4);
        let gp = std::fs::read_to_string(dir.path().join("demo.gp")).unwrap();
        assert!(gp.contains("'demo.csv' using 1:2"));
        let back: StudyReport = serde_json::from_reader(std::fs::File::open(&paths[0]).unwrap()).unwrap();
        assert_eq!(back.series[0].column("y").unwrap(), vec![2.0, 4.0]);
    }
}
