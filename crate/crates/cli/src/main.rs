//! `atlas <subcommand> --config run.json [--out dir]`
//!
//! Exit codes: 0 success, 2 configuration (or out-of-domain request), 3
//! solver or I/O failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sis_atlas::AtlasError;

use crate::output::{Artifacts, ManifestInfo};

#[derive(Parser)]
#[command(
    name = "atlas",
    version,
    about = "Endemic-equilibrium atlas for the diffusive SIS model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Io {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenpair: eigen.json, phi1.csv.
    Eigen(Io),
    /// Bifurcation curves on the logistic scan: curve.csv, critical.json.
    Curve(Io),
    /// Endemic equilibria at the configured R0 and dS: roots.json, root_k.csv.
    Classify(Io),
    /// Threshold values: thresholds.json.
    Thresholds(Io),
    /// Small-dS limit profiles: profiles.json, *_profile.csv, scaling.json.
    Profiles(Io),
    /// Time integration to a steady state: steady.json, trajectory.csv.
    Simulate(Io),
    /// Perturbation expansion and sign checks: expansion.json, regime.json.
    Appendix(Io),
}

enum Failure {
    Model(AtlasError),
    Io(std::io::Error),
}

impl From<AtlasError> for Failure {
    fn from(e: AtlasError) -> Self {
        Failure::Model(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let t0 = Instant::now();
    let (name, io) = match &cli.command {
        Command::Eigen(io) => ("eigen", io),
        Command::Curve(io) => ("curve", io),
        Command::Classify(io) => ("classify", io),
        Command::Thresholds(io) => ("thresholds", io),
        Command::Profiles(io) => ("profiles", io),
        Command::Simulate(io) => ("simulate", io),
        Command::Appendix(io) => ("appendix", io),
    };
    let loaded = config::load(&io.config)?;
    let mut art = Artifacts::default();
    let ctx = commands::prepare(&loaded, &mut art)?;
    match cli.command {
        Command::Eigen(_) => commands::eigen(&ctx, &mut art)?,
        Command::Curve(_) => commands::curve(&ctx, &mut art)?,
        Command::Classify(_) => commands::classify_cmd(&ctx, &mut art)?,
        Command::Thresholds(_) => commands::thresholds(&ctx, &mut art)?,
        Command::Profiles(_) => commands::profiles(&ctx, &mut art)?,
        Command::Simulate(_) => commands::simulate(&ctx, &mut art)?,
        Command::Appendix(_) => commands::appendix(&ctx, &mut art)?,
    }
    let out = io
        .out
        .clone()
        .unwrap_or_else(|| loaded.base.join(&loaded.config.output.directory));
    let info = ManifestInfo {
        command: name,
        config: serde_json::to_value(&loaded.config).unwrap_or_default(),
        nodes: loaded.config.domain.nodes,
        wall_time: t0.elapsed().as_secs_f64(),
    };
    output::commit(&out, &art, &info).map_err(Failure::Io)?;
    for f in art.names() {
        println!("{}", out.join(f).display());
    }
    println!("{}", out.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("atlas: {e}");
            match e {
                AtlasError::Config(_) | AtlasError::Domain(_) => ExitCode::from(2),
                AtlasError::Solver(_) => ExitCode::from(3),
            }
        }
        Err(Failure::Io(e)) => {
            eprintln!("atlas: cannot write outputs: {e}");
            ExitCode::from(3)
        }
    }
}
