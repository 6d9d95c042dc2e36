//! `sdmasim`: run a throughput sweep and emit CSV (and optionally plot data).

mod plot;
mod scenario_file;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use sdma_core::harness::{figure_scenario, run_scenario};
use sdma_core::{Scenario, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioName {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

/// Monte Carlo sum-throughput sweeps for concurrent-link SDMA MAC schemes.
#[derive(Debug, Parser)]
#[command(name = "sdmasim", version)]
struct Cli {
    /// Built-in figure scenario, or `custom` with --config.
    #[arg(long, value_enum)]
    scenario: ScenarioName,
    /// TOML scenario file (required for `custom`).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Topologies per (scheme, K) cell.
    #[arg(long)]
    topologies: Option<usize>,
    /// Base seed for the sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write gnuplot data (.dat) and script (.gp) next to the CSV.
    #[arg(long)]
    plot: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid scenario file: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

fn build_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let mut s = match (cli.scenario, &cli.config) {
        (ScenarioName::Custom, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            scenario_file::parse_scenario(&text)?
        }
        (ScenarioName::Custom, None) => return Err(CliError::Usage("--scenario custom requires --config".into())),
        (_, Some(_)) => return Err(CliError::Usage("--config is only valid with --scenario custom".into())),
        (name, None) => {
            let label = format!("{name:?}").to_lowercase();
            figure_scenario(&label)?
        }
    };
    if let Some(n) = cli.topologies {
        s.n_topologies = n;
    }
    if let Some(seed) = cli.seed {
        s.base_seed = seed;
    }
    Ok(s)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let scenario = build_scenario(cli)?;
    let result = run_scenario(&scenario)?;
    let csv = result.to_csv();
    match &cli.out {
        Some(path) => std::fs::write(path, &csv).map_err(io_err(path))?,
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(io_err("<stdout>"))?,
    }
    if cli.plot {
        let base = cli.out.clone().unwrap_or_else(|| PathBuf::from(&scenario.name));
        let (dat, gp) = plot::write(&result, &base).map_err(io_err(&base))?;
        eprintln!("wrote {} and {}", dat.display(), gp.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sdmasim: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
