//! Command-line front end: argument parsing, configuration loading, output
//! files and run manifests.

mod commands;
pub mod config;
pub mod manifest;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use config::{
    BenchRunConfig, FitConfig, PlotConfig, ProtocolConfig, Recipe, Resolved, SimulateConfig, DEFAULTS_HELP,
};
pub use manifest::RunManifest;

pub const THREADS_ENV: &str = "SYNAPSE_CASCADE_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("malformed config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] synapse_cascade::Error),
}

impl CliError {
    pub(crate) fn file(path: &Path, source: std::io::Error) -> Self {
        CliError::File {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for usage, configuration and file problems, 2 for numerical and
    /// ingestion failures.
    pub fn exit_code(&self) -> i32 {
        use synapse_cascade::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::File { .. } => 1,
            CliError::Core(E::InvalidInput(_) | E::Io(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "synapse-cascade",
    version,
    about = "Simulate multi-compartment synapse chains, fit them to traces, and benchmark familiarity memory",
    after_long_help = DEFAULTS_HELP
)]
struct Cli {
    /// TOML configuration for the subcommand; absent keys take the defaults
    /// listed below
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed for stochastic commands [default: 0]
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory, created if missing
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Worker threads [default: all cores]
    #[arg(long, global = true, value_name = "N", env = THREADS_ENV)]
    threads: Option<usize>,

    /// Table format for outputs
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a pulse train to a chain and write trace.csv
    Simulate,
    /// Run a named write protocol
    Protocol {
        #[arg(value_enum)]
        recipe: Recipe,
    },
    /// Estimate chain parameters from an observed trace and write fit.json
    Fit {
        /// Observed trace CSV (overrides `trace` in the config)
        #[arg(long, value_name = "CSV")]
        trace: Option<PathBuf>,
    },
    /// Run the familiarity benchmark and write metrics.csv and lifetimes.csv
    Bench {
        /// Feature matrix (CSV or FVEC) to draw patterns from
        #[arg(long, value_name = "FILE")]
        features: Option<PathBuf>,
    },
    /// Draw columns of a CSV file as an SVG line chart
    Plot(PlotArgs),
    /// Re-run the invocation recorded in a manifest
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// CSV file to read
    #[arg(long, value_name = "CSV")]
    input: Option<PathBuf>,
    /// Comma-separated y columns [default: every column except x]
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// X column [default: first column]
    #[arg(long)]
    x: Option<String>,
    /// Logarithmic x axis
    #[arg(long)]
    log_x: bool,
    /// Chart title
    #[arg(long)]
    title: Option<String>,
    /// SVG file name, relative to --out [default: chart.svg]
    #[arg(long, value_name = "FILE")]
    output: Option<String>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(std::io::stdout(), "{e}");
                    0
                }
                _ => {
                    let rendered = e.to_string();
                    let line = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
                    eprintln!("{}", line.trim());
                    1
                }
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let Format::Csv = cli.format;
    let resolved = match cli.command {
        Command::Replay { manifest } => {
            if cli.config.is_some() || cli.seed.is_some() {
                return Err(CliError::Usage("replay takes its configuration from the manifest".into()));
            }
            RunManifest::read(&manifest)?.config
        }
        command => resolve(command, cli.config.as_deref(), cli.seed)?,
    };
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| commands::dispatch(&resolved, &cli.out))
        }
        None => commands::dispatch(&resolved, &cli.out),
    }
}

fn read_config(path: Option<&Path>) -> Result<Option<toml::Table>, CliError> {
    let Some(path) = path else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    toml::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

fn from_table<T: serde::de::DeserializeOwned + Default>(table: Option<toml::Table>) -> Result<T, CliError> {
    match table {
        None => Ok(T::default()),
        Some(t) => toml::Value::Table(t)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string())),
    }
}

fn existing(path: PathBuf) -> Result<PathBuf, CliError> {
    std::fs::canonicalize(&path).map_err(|e| CliError::file(&path, e))
}

fn resolve(command: Command, config: Option<&Path>, seed: Option<u64>) -> Result<Resolved, CliError> {
    let table = read_config(config)?;
    Ok(match command {
        Command::Simulate => Resolved::Simulate(from_table::<SimulateConfig>(table)?),
        Command::Protocol { recipe } => Resolved::Protocol {
            recipe,
            config: from_table::<ProtocolConfig>(table)?,
        },
        Command::Fit { trace } => {
            let mut cfg: FitConfig = from_table(table)?;
            let trace = trace
                .or(cfg.trace.take())
                .ok_or_else(|| CliError::Usage("fit needs an observed trace (--trace)".into()))?;
            cfg.trace = Some(existing(trace)?);
            Resolved::Fit(cfg)
        }
        Command::Bench { features } => {
            let mut table = table.unwrap_or_default();
            let from_file = match table.remove("features") {
                None => None,
                Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
                Some(_) => return Err(CliError::Config("features must be a path".into())),
            };
            let mut cfg = BenchRunConfig {
                bench: from_table(Some(table))?,
                features: features.or(from_file),
            };
            if let Some(seed) = seed {
                cfg.bench.seed = seed;
            }
            cfg.features = cfg.features.map(existing).transpose()?;
            Resolved::Bench(cfg)
        }
        Command::Plot(args) => {
            let mut cfg: PlotConfig = from_table(table)?;
            if args.input.is_some() {
                cfg.input = args.input;
            }
            if !args.columns.is_empty() {
                cfg.columns = args.columns;
            }
            if args.x.is_some() {
                cfg.x = args.x;
            }
            cfg.log_x |= args.log_x;
            if args.title.is_some() {
                cfg.title = args.title;
            }
            if let Some(o) = args.output {
                cfg.output = o;
            }
            let input = cfg
                .input
                .take()
                .ok_or_else(|| CliError::Usage("plot needs an input CSV (--input)".into()))?;
            cfg.input = Some(existing(input)?);
            Resolved::Plot(cfg)
        }
        Command::Replay { .. } => unreachable!("replay is resolved from its manifest"),
    })
}
