//! `lawson`: command-line front end.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lawson_spectral::cli::{self, RunConfig};
use lawson_spectral::Complex64;

#[derive(Parser)]
#[command(name = "lawson", version, about = "Spectral-data pipeline for Lawson's genus two minimal surface")]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all random choices.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the theta-function invariants.
    ThetaCheck {
        /// Number of series terms.
        #[arg(long)]
        terms: Option<usize>,
        /// Number of random sample points.
        #[arg(long)]
        points: Option<usize>,
        /// Side of the additional sample grid.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Tabulate the unitarizing coefficient on a grid.
    AuTable {
        #[arg(long)]
        grid: Option<usize>,
        /// File name inside the output directory.
        #[arg(long)]
        out: Option<String>,
    },
    /// Solve for spectral data.
    Solve {
        /// Number of x coefficients N.
        #[arg(long)]
        truncation: Option<usize>,
        /// Collocation nodes on the unit circle.
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Reconstruct the surface mesh from spectral data.
    Reconstruct {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Also build the simple factor dressing at this lambda_0, e.g. 0.5+0.2i.
        #[arg(long)]
        dress: Option<Complex64>,
    },
    /// Reconstruct the surface and its simple factor dressing.
    Dress {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Dressing parameter, e.g. 0.5+0.2i.
        #[arg(long)]
        lambda0: Option<Complex64>,
    },
    /// Evaluate the area formula on spectral data.
    Area {
        /// Spectral-data JSON written by `solve`.
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Args)]
struct MeshArgs {
    /// Spectral-data JSON written by `solve`.
    #[arg(long)]
    data: PathBuf,
    /// Grid cells per unit length.
    #[arg(long)]
    cells: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    match cli.command {
        Command::ThetaCheck { terms, points, grid } => {
            set(&mut cfg.theta.terms, terms);
            set(&mut cfg.theta.points, points);
            set(&mut cfg.theta.grid, grid);
            cli::cmd_theta_check(&cfg).context("theta-check")?;
        }
        Command::AuTable { grid, out } => {
            set(&mut cfg.au.grid, grid);
            set(&mut cfg.au.out, out);
            cli::cmd_au_table(&cfg).context("au-table")?;
        }
        Command::Solve { truncation, nodes, tol } => {
            set(&mut cfg.spectral.truncation, truncation);
            set(&mut cfg.spectral.n_points, nodes);
            set(&mut cfg.spectral.tol, tol);
            cli::cmd_solve(&cfg).context("solve")?;
        }
        Command::Reconstruct { mesh, dress } => {
            set(&mut cfg.reconstruct.cells, mesh.cells);
            if let Some(l) = dress {
                cfg.dress.lambda0 = [l.re, l.im];
            }
            cli::cmd_reconstruct(&cfg, &mesh.data, dress.is_some()).context("reconstruct")?;
        }
        Command::Dress { mesh, lambda0 } => {
            set(&mut cfg.reconstruct.cells, mesh.cells);
            if let Some(l) = lambda0 {
                cfg.dress.lambda0 = [l.re, l.im];
            }
            cli::cmd_reconstruct(&cfg, &mesh.data, true).context("dress")?;
        }
        Command::Area { data } => {
            cli::cmd_area(&cfg, &data).context("area")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on malformed arguments
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e
                .chain()
                .any(|c| c.downcast_ref::<lawson_spectral::Error>().is_some_and(|e| e.is_usage()));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
