//! Parameter sweeps over `h`, fits of the measured eigenvalues and
//! comparison with the semiclassical predictions.

pub mod config;
pub mod fit;
pub mod report;
pub mod runs;

use std::path::PathBuf;

pub use config::{parse_inverse_range, AgmonSettings, BandSettings, GridTemplate, StudyKind, SweepConfig, WellSpec};
pub use fit::{fit_exp_rate, fit_exp_rate_pow, fit_plateau, fit_poly, fit_power, FitModel, FitParam, FitResult};
pub use report::{Row, Series, StudyReport, Verdict};
pub use runs::{
    run, run_agmon, run_band_table, run_camel, run_domain_convergence, run_double_well, run_simple_well, Bumps,
};

use crate::error::Result;

/// Runs the study and writes its outputs to `config.output_dir`.
pub fn run_and_write(config: &SweepConfig) -> Result<(StudyReport, Vec<PathBuf>)> {
    let report = run(config)?;
    let paths = report.write(&config.output_dir, config.emit_plots)?;
    Ok((report, paths))
}
