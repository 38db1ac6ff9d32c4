use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use excursion::config::{ConfigError, ExperimentConfig, Mode};
use excursion::harness::{self, HarnessError};
use excursion::SimulationError;

const EXIT_CONFIG: u8 = 2;
const EXIT_EMBEDDING: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

/// Mean Euler characteristic of Gaussian excursion sets: closed forms and
/// Monte-Carlo checks.
#[derive(Debug, Parser)]
#[command(name = "excursion", version)]
struct Cli {
    /// Worker threads for replication-parallel work.
    #[arg(long, global = true, env = "EXCURSION_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the closed-form mean Euler characteristic.
    Predict {
        #[arg(long)]
        config: PathBuf,
    },
    /// Draw one field and report its windowed Euler characteristic.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the raw field (f64 little-endian) here, with a `.hdr` sidecar.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Compare the Monte-Carlo mean with the prediction.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write per-replication values as CSV.
        #[arg(long)]
        chi_table: Option<PathBuf>,
    },
    /// Tabulate curvature densities by every available route.
    Density {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Random flags for the Monte-Carlo column.
        #[arg(long, default_value_t = 100_000)]
        flags: usize,
    },
    /// Evaluate the flag density at one flag.
    FlagDensity {
        #[arg(long)]
        config: PathBuf,
        /// Flag direction, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Vec<f64>,
        /// Basis vector of the flag subspace, comma separated; repeat for more.
        /// The order is d - 1 minus the number of basis vectors.
        #[arg(long, allow_hyphen_values = true)]
        basis: Vec<String>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("validation failed: |mean - prediction| = {gap:.6} exceeds {tolerance:.6}")]
    Acceptance { gap: f64, tolerance: f64 },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Harness(HarnessError::Config(_) | HarnessError::Core(_)) => EXIT_CONFIG,
            CliError::Harness(HarnessError::Simulation(SimulationError::EmbeddingNotPD { .. })) => EXIT_EMBEDDING,
            CliError::Harness(HarnessError::Simulation(SimulationError::InvalidGrid(_))) => EXIT_CONFIG,
            CliError::Acceptance { .. } => EXIT_ACCEPTANCE,
            _ => 1,
        }
    }
}

fn load(path: &Path, subcommand: Mode) -> Result<ExperimentConfig, CliError> {
    let config = ExperimentConfig::from_path(path)?;
    if let Some(mode) = config.mode {
        if mode != subcommand {
            eprintln!("warning: config mode {mode:?} ignored; running {subcommand:?}");
        }
    }
    Ok(config)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn with_seed(mut config: ExperimentConfig, seed: Option<u64>) -> ExperimentConfig {
    if let (Some(seed), Some(mc)) = (seed, config.mc.as_mut()) {
        mc.seed = seed;
    }
    config
}

fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| ConfigError::Invalid(format!("cannot parse vector {text:?}: {e}")).into())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Predict { config } => {
            let config = load(&config, Mode::Predict)?;
            println!("{}", harness::predict(&config)?);
        }
        Command::Simulate { config, seed, dump } => {
            let config = load(&config, Mode::Simulate)?;
            let seed = seed
                .or(config.mc.as_ref().map(|mc| mc.seed))
                .ok_or_else(|| ConfigError::Invalid("give --seed or mc.seed".into()))?;
            let (sample, summary) = harness::simulate_once(&config, seed)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(path) = dump {
                sample
                    .write_raw(&path, &config.model()?)
                    .map_err(|e| CliError::Harness(HarnessError::Simulation(e)))?;
            }
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Validate { config, seed, output, chi_table } => {
            let config = with_seed(load(&config, Mode::Validate)?, seed);
            let report = harness::run_validation(&config, cli.threads)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            match output {
                Some(path) => write(&path, &report.to_json())?,
                None => println!("{}", report.to_json()),
            }
            if let Some(path) = chi_table {
                write(&path, &report.chi_csv())?;
            }
            if !report.passed {
                return Err(CliError::Acceptance {
                    gap: (report.mc_mean - report.prediction).abs(),
                    tolerance: report.tolerance,
                });
            }
        }
        Command::Density { config, seed, flags } => {
            let config = with_seed(load(&config, Mode::Density)?, seed);
            println!("{}", harness::density_report(&config, flags)?.to_json());
        }
        Command::FlagDensity { config, direction, basis } => {
            let config = ExperimentConfig::from_path(&config)?;
            let basis = basis.iter().map(|b| parse_vector(b)).collect::<Result<Vec<_>, _>>()?;
            println!("{}", harness::flag_density(&config, &direction, &basis)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Harness(HarnessError::Simulation(SimulationError::EmbeddingNotPD { .. })) = e {
                eprintln!("hint: enlarge grid.n or grid.h so that n*h covers at least 8 correlation lengths");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
