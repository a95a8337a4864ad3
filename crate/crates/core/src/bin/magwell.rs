use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use magwell::error::{Error, Result};
use magwell::studies::{parse_inverse_range, run_and_write, StudyKind, SweepConfig};

#[derive(Parser)]
#[command(name = "magwell", version, about = "Semiclassical magnetic well studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band function table and minimum.
    Band {
        #[arg(short, long, default_value_t = 0)]
        k: u32,
        #[command(flatten)]
        common: Common,
    },
    /// h-sweep for a single magnetic well.
    SimpleWell {
        #[arg(short, long, default_value_t = 1)]
        k: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Tunneling gap in a symmetric double well.
    DoubleWell {
        #[arg(short, long, default_value_t = 0)]
        k: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Neumann ground states near boundary curvature maxima.
    Camel {
        #[arg(long, value_enum, default_value_t = BumpArg::One)]
        bumps: BumpArg,
        #[command(flatten)]
        common: Common,
    },
    /// Decay profile of the double-well ground state.
    Agmon {
        #[arg(short, long, default_value_t = 0)]
        k: u32,
        /// Read the eigenvector dump in this directory instead of solving.
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Lowest eigenvalues on nested Dirichlet boxes.
    DomainConv {
        #[arg(short, long, default_value_t = 1)]
        k: u32,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BumpArg {
    One,
    Two,
}

#[derive(Args)]
struct Common {
    /// JSON file with the full study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Range of 1/h as "first:step:last".
    #[arg(long = "h")]
    h_range: Option<String>,
    /// Fine grid resolution.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    eigs: Option<usize>,
    /// Seed of the Lanczos starting vectors.
    #[arg(long)]
    seed: Option<u64>,
    /// Write gnuplot scripts next to the data.
    #[arg(long)]
    emit_plots: bool,
    /// Write the fine-grid eigenvectors of every h.
    #[arg(long)]
    dump_vectors: bool,
}

impl Common {
    fn build(&self, kind: StudyKind, k: Option<u32>) -> Result<SweepConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let c = SweepConfig::load(p)?;
                if c.study_kind != kind {
                    return Err(Error::InvalidInput(format!(
                        "{} holds a {} study, not {}",
                        p.display(),
                        c.study_kind.name(),
                        kind.name()
                    )));
                }
                c
            }
            None => SweepConfig::preset(kind, k.unwrap_or(0)),
        };
        if let Some(k) = k.filter(|_| self.config.is_none()) {
            c.k = k;
        }
        if let Some(out) = &self.out {
            c.output_dir = out.clone();
        }
        if let Some(spec) = &self.h_range {
            c.h_list = parse_inverse_range(spec)?;
        }
        if let Some(g) = &self.grid {
            c.grid.nx = g[0];
            c.grid.ny = g[1];
        }
        if let Some(n) = self.eigs {
            c.n_eigs = n;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.emit_plots |= self.emit_plots;
        c.dump_vectors |= self.dump_vectors;
        c.validate()?;
        Ok(c)
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let config = match cli.command {
        Command::Band { k, common } => common.build(StudyKind::BandTable, Some(k))?,
        Command::SimpleWell { k, common } => common.build(StudyKind::SimpleWell, Some(k))?,
        Command::DoubleWell { k, common } => common.build(StudyKind::DoubleWell, Some(k))?,
        Command::Camel { bumps, common } => {
            let kind = match bumps {
                BumpArg::One => StudyKind::Camel1Bump,
                BumpArg::Two => StudyKind::Camel2Bump,
            };
            common.build(kind, None)?
        }
        Command::Agmon { k, vectors, common } => {
            let mut c = common.build(StudyKind::Agmon, Some(k))?;
            if let (Some(v), Some(a)) = (vectors, c.agmon.as_mut()) {
                a.vectors = Some(v);
            }
            c
        }
        Command::DomainConv { k, common } => common.build(StudyKind::DomainConvergence, Some(k))?,
    };
    let (report, paths) = run_and_write(&config)?;
    for v in &report.verdicts {
        println!(
            "{} {:<22} measured {:<14.6e} expected [{:.6e}, {:.6e}]  {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.measured,
            v.expected.0,
            v.expected.1,
            v.note
        );
    }
    for f in &report.failures {
        eprintln!(
            "failure{}: {}",
            f.h.map(|h| format!(" at h = {h}")).unwrap_or_default(),
            f.message
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(report.failures.is_empty())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
