mod algebra;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;
use config::{ConfigError, ExperimentConfig, Setup};
use output::OutputDir;

#[derive(Parser)]
#[command(name = "magtrace", version, about = "Trace-per-unit-volume and Dixmier trace experiments for magnetic operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; built-in defaults when absent
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "magtrace-out")]
    out: PathBuf,
    #[arg(long, global = true, env = "MAGTRACE_WORKERS")]
    workers: Option<usize>,
    /// Overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Drops Dixmier schedule entries above N
    #[arg(long, global = true)]
    schedule_max: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Pointwise scaling limits and L1 norms of the partial sums
    Scaling,
    /// A-sequences on the configured regions and their extrapolated limits
    Dixmier,
    /// Følner box traces and the trace per unit volume
    Tuv,
    /// Dixmier average, hull trace and trace per unit volume side by side
    Compare,
    /// Twisted-algebra identity suite
    AlgebraCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Scaling => "scaling",
            Command::Dixmier => "dixmier",
            Command::Tuv => "tuv",
            Command::Compare => "compare",
            Command::AlgebraCheck => "algebra-check",
        }
    }
}

fn load(cli: &Cli) -> Result<Setup, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(max) = cli.schedule_max {
        config.dixmier.schedule.retain(|&n| n <= max);
    }
    if cli.workers == Some(0) {
        return Err(ConfigError("--workers must be positive".into()));
    }
    config.build()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let setup = match load(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {}", e.0);
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let out = match OutputDir::create(&cli.out, &setup.hash, cli.command.name()) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("output directory {}: {e}", cli.out.display());
            return ExitCode::from(2);
        }
    };
    let schedule = setup.config.dixmier.schedule.clone();
    let outcome = match cli.command {
        Command::Scaling => commands::scaling(&setup, &out),
        Command::Dixmier => commands::dixmier(&setup, &out, &schedule),
        Command::Tuv => commands::tuv(&setup, &out),
        Command::Compare => commands::compare(&setup, &out, &schedule),
        Command::AlgebraCheck => algebra::algebra_check(&setup, &out),
    };
    match outcome {
        Ok(true) => {
            println!("{}: pass ({})", cli.command.name(), cli.out.display());
            ExitCode::SUCCESS
        }
        Ok(false) => {
            println!("{}: tolerance breach, see {}", cli.command.name(), out.path("summary.json").display());
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("{}: numeric failure: {msg}", cli.command.name());
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("{}: {e}", cli.command.name());
            ExitCode::from(2)
        }
    }
}
