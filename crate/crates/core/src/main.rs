use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smallscat::cli::{exit_code, run, validate, RunConfig};
use smallscat::{Error, Result};

#[derive(Parser)]
#[command(name = "smallscat", version, about = "Scattering by many small particles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the random placement helpers, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fail with exit status 4 on regime violations instead of warning or rerouting.
    #[arg(long, global = true)]
    strict_dominance: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured stage and write CSV outputs plus run_report.json.
    Run { config: PathBuf },
    /// Print regime margins, dominance bound and memory estimate without solving.
    Validate { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<RunConfig> {
    let mut config = RunConfig::from_path(path)?;
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.solver.strict_dominance |= cli.strict_dominance;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfiguration(format!("--threads: {e}")))?;
    }
    let (report, path) = match &cli.command {
        Command::Run { config } => (run(&load(cli, config)?)?, config),
        Command::Validate { config } => (validate(&load(cli, config)?)?, config),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Contract(e.to_string()))?;
    println!("{json}");
    if !report.regime_ok {
        log::warn!("{}: regime violations present", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
