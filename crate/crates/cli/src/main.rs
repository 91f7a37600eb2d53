mod plot;
mod run;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dynspan::workload::{generate, star, GenParams, Workload};
use dynspan::ShapeKind;

#[derive(Parser)]
#[command(name = "dynspan", version, about = "Dynamic spanners and connectivity for disk and cube intersection graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Disk,
    Cube,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Spanner,
    Connectivity,
    Focused,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Big,
    Small,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a seeded random workload.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of operations.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 16.0)]
        psi: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, value_enum, default_value_t = Kind::Disk)]
        kind: Kind,
        /// Probability that an operation is a deletion.
        #[arg(long, default_value_t = 0.3)]
        churn: f64,
        /// Lower corner of the center region (default 0).
        #[arg(long)]
        origin: Option<f64>,
        /// Side of the center region (default Ψ*, the bounded box).
        #[arg(long)]
        region: Option<f64>,
        /// Emit the star configuration with this many insert/delete rounds of the big disk.
        #[arg(long)]
        star: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a workload and write per-update metrics as CSV.
    Run {
        workload: PathBuf,
        #[arg(long, value_enum, default_value_t = Engine::Spanner)]
        engine: Engine,
        #[arg(long, value_enum, default_value_t = Mode::Small)]
        mode: Mode,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Override the workload's Ψ.
        #[arg(long)]
        psi: Option<f64>,
        /// Expected dimension; must match the workload.
        #[arg(long)]
        dim: Option<usize>,
        /// Run the oracle checks after every k-th update (0: never).
        #[arg(long, default_value_t = 0)]
        verify_every: usize,
        /// Metrics CSV (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Edge event log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Render SVG charts from metrics CSVs.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Generate { seed, n, psi, dim, kind, churn, origin, region, star: rounds, out } => {
            if !(0.0..1.0).contains(&churn) {
                bail!("--churn must lie in [0, 1)");
            }
            let kind = match kind {
                Kind::Disk => ShapeKind::Disk,
                Kind::Cube => ShapeKind::Cube,
            };
            if kind == ShapeKind::Disk && dim != 2 {
                bail!("disks need --dim 2");
            }
            let w = match rounds {
                Some(r) => star(psi, r),
                None => {
                    let mut p = GenParams::new(seed, n, psi, dim, kind, churn);
                    if origin.is_some() || region.is_some() {
                        p = p.with_region(origin.unwrap_or(0.0), region.unwrap_or(p.region));
                    }
                    generate(&p)
                }
            };
            write_out(&out, &w.to_text())
        }
        Cmd::Run { workload, engine, mode, eps, psi, dim, verify_every, out, log } => {
            let text = fs::read_to_string(&workload).with_context(|| format!("reading {}", workload.display()))?;
            let mut w = Workload::parse(&text)?;
            if let Some(d) = dim {
                if d != w.dim {
                    bail!("--dim {d} but the workload is {}-dimensional", w.dim);
                }
            }
            if let Some(p) = psi {
                w.psi = p;
            }
            let opts = run::Options { engine, mode, eps, verify_every, log: log.is_some() };
            let report = run::run(&w, &opts)?;
            if let Some(p) = &log {
                fs::write(p, report.log.join("\n") + "\n").with_context(|| format!("writing {}", p.display()))?;
            }
            write_out(&out, &report.csv)?;
            eprintln!("{} updates, {} checks, {} violations", w.ops.len(), report.checks, report.violations);
            if report.violations > 0 {
                bail!("oracle violations: {}", report.violations);
            }
            Ok(())
        }
        Cmd::Plot { csv, out } => {
            fs::create_dir_all(&out)?;
            for p in plot::plot(&csv, &out)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}
