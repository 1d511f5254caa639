//! `epe`: run and validate the expected-prediction-error scenarios.
//!
//! Exit codes: 0 when the scenario expectation holds, 1 when it does not,
//! 2 for configuration and I/O errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use epe_core::batteries::identity_suite;
use epe_core::{run_scenario, ScenarioConfig, ScenarioId};

const EXIT_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "epe", version, about = "Expected-prediction-error scenarios on tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario config and write its CSV report.
    Run(RunArgs),
    /// Parse and check a scenario config without running it.
    Validate(ConfigArg),
    /// Print the available scenario ids.
    ListScenarios,
    /// Run the randomized identity batteries.
    IdentitySuite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Scenario config file.
    #[arg(value_name = "CONFIG", required_unless_present = "config", conflicts_with = "config")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn path(&self) -> &Path {
        self.path
            .as_deref()
            .or(self.config.as_deref())
            .expect("clap requires one of the two")
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; defaults to the config's `output`, then stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

fn load(path: &Path) -> Result<ScenarioConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ScenarioConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Relative `output` paths in a config resolve against the config's directory.
fn resolve_output(config_path: &Path, output: &Path) -> PathBuf {
    match config_path.parent() {
        Some(dir) if output.is_relative() => dir.join(output),
        _ => output.to_path_buf(),
    }
}

fn run(args: &RunArgs) -> Result<bool, String> {
    let path = args.config.path();
    let mut cfg = load(path)?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    let report = run_scenario(&cfg).map_err(|e| format!("{}: {e}", cfg.id))?;
    let Format::Csv = args.format;
    let target = args
        .out
        .clone()
        .or_else(|| cfg.output.as_deref().map(|o| resolve_output(path, o)));
    match &target {
        Some(out) => {
            let file = fs::File::create(out).map_err(|e| format!("{}: {e}", out.display()))?;
            report.write_csv(io::BufWriter::new(file)).map_err(|e| e.to_string())?;
        }
        None => report.write_csv(io::stdout().lock()).map_err(|e| e.to_string())?,
    }
    eprintln!(
        "{} seed {}: {} rows{}",
        cfg.id,
        cfg.seed,
        report.rows.len(),
        target.map(|p| format!(" -> {}", p.display())).unwrap_or_default()
    );
    eprintln!(
        "{}: {}",
        if report.passed { "PASS" } else { "FAIL" },
        report.expectation
    );
    Ok(report.passed)
}

fn validate(arg: &ConfigArg) -> Result<bool, String> {
    let cfg = load(arg.path())?;
    eprintln!("{}: valid {} config (seed {})", arg.path().display(), cfg.id, cfg.seed);
    Ok(true)
}

fn list_scenarios() -> Result<bool, String> {
    let mut out = io::stdout().lock();
    for id in ScenarioId::ALL {
        writeln!(out, "{id}").map_err(|e| e.to_string())?;
    }
    for id in ScenarioId::ALL {
        eprintln!("{id:<22} {}", id.summary());
    }
    Ok(true)
}

fn identity(seed: u64) -> Result<bool, String> {
    let reports = identity_suite(seed).map_err(|e| e.to_string())?;
    for r in &reports {
        eprintln!("{r}");
    }
    Ok(reports.iter().all(|r| r.passed()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Validate(arg) => validate(arg),
        Command::ListScenarios => list_scenarios(),
        Command::IdentitySuite { seed } => identity(*seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
