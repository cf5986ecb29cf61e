//! `hdent` command-line front end.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hdent::analysis::DEFAULT_ATTENUATION_DB_PER_KM;
use hdent::Result;
use serde_json::json;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "hdent", version, about = "Simulate and certify noisy high-dimensional entangled photon pairs")]
struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Poisson replicates for error bars (0 disables).
    #[arg(long, global = true)]
    resamples: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate HV and DA tag files for every point of the noise grid.
    SimulateTags {
        #[arg(long)]
        frames: Option<u64>,
    },
    /// Witness reports for each d from one HV/DA pair of tag files.
    CertifyEt {
        #[arg(long)]
        hv: PathBuf,
        #[arg(long)]
        da: PathBuf,
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long)]
        eta_hwp: Option<f64>,
    },
    /// Visibility-sum sweep over the mixing weight in a prime dimension.
    MubSweep {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Mixing weights to scan.
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
    },
    /// Simulated time-bin sweep over background rates.
    SweepNoise {
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        rates: Vec<f64>,
    },
    /// Poisson Monte Carlo spread of the witness for tag files.
    Resample {
        #[arg(long)]
        hv: PathBuf,
        #[arg(long)]
        da: PathBuf,
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long)]
        eta_hwp: Option<f64>,
    },
    /// Fiber length for a loss budget, or loss for a length.
    LinkBudget {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        db: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        km: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_ATTENUATION_DB_PER_KM)]
        attenuation: f64,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(n) = cli.resamples {
        cfg.resamples = n;
    }
    Ok(cfg)
}

fn or_config(given: &[usize], cfg: &RunConfig) -> Vec<usize> {
    if given.is_empty() {
        cfg.binning.dims.clone()
    } else {
        given.to_vec()
    }
}

fn run(cli: Cli) -> Result<String> {
    let mut cfg = load_config(&cli)?;
    let value = match cli.command {
        Command::SimulateTags { frames } => commands::simulate_tags(&cfg, frames)?,
        Command::CertifyEt { hv, da, dims, eta_hwp } => {
            let dims = or_config(&dims, &cfg);
            commands::certify_et(&cfg, &hv, &da, &dims, eta_hwp.unwrap_or(cfg.source.eta_hwp))?
        }
        Command::MubSweep { d, k, p } => {
            cfg.experiment = config::Experiment::PathwayII;
            if !p.is_empty() {
                cfg.sweep.noise = Some(p);
            }
            if let Some(d) = d {
                cfg.mub.d = d;
            }
            if !k.is_empty() {
                cfg.mub.k = k;
            }
            commands::mub_sweep_cmd(&cfg)?
        }
        Command::SweepNoise { frames, rates } => {
            if !rates.is_empty() {
                cfg.sweep.noise = Some(rates);
            }
            commands::sweep_noise(&cfg, frames)?
        }
        Command::Resample { hv, da, dims, eta_hwp } => {
            let dims = or_config(&dims, &cfg);
            commands::resample(&cfg, &hv, &da, &dims, eta_hwp.unwrap_or(cfg.source.eta_hwp))?
        }
        Command::LinkBudget { db, km, attenuation } => return commands::link_budget(&db, &km, attenuation),
    };
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_owned()),
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string()),
    }
}

