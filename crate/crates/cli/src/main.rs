//! `bdc`: purity-decay simulator for billiards coupled to a thermal bath.
//!
//! Exit codes: 0 success, 2 configuration error, 3 convergence escalation,
//! 4 runtime error, 5 oracle comparison failure.

use bdc_cli::commands::{self, CliError, Ctx};
use bdc_cli::config::{self, RunConfig};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bdc", version, about = "Billiard decoherence toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file (one dotted `key = value` per line).
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV output path; stdout when omitted. A resolved-config sidecar
    /// `<out>.cfg` is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `mc.workers` (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Print a one-line machine-readable `key=value` summary.
    #[arg(long)]
    summary: bool,
    /// Trailing `key=value` config overrides.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Benettin estimate of the maximal Lyapunov exponent.
    Lyapunov(Common),
    /// Monte Carlo purity decay plus the closed-form curves.
    Purity(Common),
    /// Bath-parameter sweep of fitted decoherence rates.
    Sweep(Common),
    /// Closed forms vs quadrature self-check.
    Oracle(Common),
    /// Ergodic mean squared separation of the table.
    Ergavg(Common),
}

fn build_ctx(common: &Common) -> Result<Ctx, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let contents = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(config::ConfigError {
                field: "config".into(),
                message: format!("cannot read {path:?}: {e}"),
            })
        })?;
        cfg.apply_file(&contents, &path.display().to_string())?;
    }
    cfg.apply_overrides(&common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    }
    Ok(Ctx { cfg, out: common.out.clone(), summary: common.summary })
}

fn run(command: &Command) -> Result<(), CliError> {
    let (common, f): (&Common, fn(&mut Ctx) -> commands::CliResult) = match command {
        Command::Lyapunov(c) => (c, commands::cmd_lyapunov),
        Command::Purity(c) => (c, commands::cmd_purity),
        Command::Sweep(c) => (c, commands::cmd_sweep),
        Command::Oracle(c) => (c, commands::cmd_oracle),
        Command::Ergavg(c) => (c, commands::cmd_ergavg),
    };
    let mut ctx = build_ctx(common)?;
    f(&mut ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
