//! `pqkd`: certified key-rate bounds from a configuration file.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical or solver failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pqkd_core::pipeline::{self, RunConfig};
use pqkd_core::Error;

#[derive(Parser, Debug)]
#[command(name = "pqkd", version, about = "Certified decoy-state key-rate bounds for partially phase-randomised lasers")]
struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Destination CSV; standard output when neither this nor `output.path` is set.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Degree of phase randomisation implied by the visibility under each phase model.
    Characterise,
    /// Simulated loss-only statistics.
    Simulate {
        /// Single distance in km instead of the configured sweep distances.
        #[arg(long, value_name = "KM")]
        distance: Option<f64>,
    },
    /// Certified statistics of every eigenblock.
    Decoy {
        #[arg(long, value_name = "KM")]
        distance: Option<f64>,
    },
    /// Certified key rate of every source at one distance.
    Keyrate {
        #[arg(long, value_name = "KM", default_value_t = 0.0)]
        distance: f64,
    },
    /// Certified key rate of every source at every configured distance.
    Sweep,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) | Error::Csv(_) => 2,
        _ => 3,
    }
}

fn check_distance(d: f64) -> Result<f64, Error> {
    if d >= 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Config(format!("distance {d} is not a finite non-negative number")))
    }
}

fn distances(cfg: &RunConfig, single: Option<f64>) -> Result<Vec<f64>, Error> {
    match single {
        Some(d) => Ok(vec![check_distance(d)?]),
        None => Ok(cfg.sweep.distances.clone()),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
    }
    let out: Box<dyn Write> = match cli.out.as_ref().or(cfg.output.path.as_ref()) {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    match cli.command {
        Command::Characterise => pipeline::write_characterisation_csv(out, &cfg, &pipeline::characterise(&cfg)?),
        Command::Simulate { distance } => {
            let points = distances(&cfg, distance)?
                .into_iter()
                .map(|x| Ok((x, pipeline::simulate(&cfg, x)?)))
                .collect::<Result<Vec<_>, Error>>()?;
            pipeline::write_statistics_csv(out, &cfg, &points)
        }
        Command::Decoy { distance } => {
            let mut reports = Vec::new();
            for source in cfg.sources()? {
                for x in distances(&cfg, distance)? {
                    reports.push(pipeline::decoy_point(&cfg, &source, cfg.protocol.mu_s, x)?);
                }
            }
            pipeline::write_decoy_csv(out, &cfg, &reports)
        }
        Command::Keyrate { distance } => {
            let x = check_distance(distance)?;
            let points = cfg
                .sources()?
                .iter()
                .map(|s| pipeline::keyrate_point(&cfg, s, x))
                .collect::<Result<Vec<_>, Error>>()?;
            pipeline::write_keyrate_csv(out, &cfg, &points)
        }
        Command::Sweep => pipeline::write_keyrate_csv(out, &cfg, &pipeline::sweep(&cfg)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pqkd: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
