//! `clab`: run forward, Carleman, stability, positivity and convergence
//! experiments from a TOML configuration.

#![allow(clippy::needless_range_loop)]

mod config;
mod error;
mod output;
mod run;
mod svg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentKind;
use error::{CliError, EXIT_CODE_HELP, EXIT_OK};
use output::{resolve_out_dir, Outputs, RunInfo};

#[derive(Parser, Debug)]
#[command(name = "clab", version, about = "Numerical experiments for parabolic systems on annuli", after_help = EXIT_CODE_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve once from a sampled source and write state and observation.
    Forward(Common),
    /// Scan the empirical Carleman constant over (s, lambda).
    Carleman(Common),
    /// Estimate the Lipschitz stability constant over the source class.
    Stability(Common),
    /// Check that nonnegative sources give nonnegative solutions.
    Positivity(Common),
    /// Measure space and time convergence orders.
    Convergence(Common),
    /// Run the kind named by `experiment.kind` in the config.
    Run(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; defaults apply to missing keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory [precedence: this flag, output.directory, CLAB_OUT, ./clab-out].
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Overrides experiment.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides experiment.workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Dotted `key=value` override applied after the file, e.g. `geometry.n_r=33`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let (kind, common) = match cli.command {
        Command::Forward(c) => (Some(ExperimentKind::Forward), c),
        Command::Carleman(c) => (Some(ExperimentKind::Carleman), c),
        Command::Stability(c) => (Some(ExperimentKind::Stability), c),
        Command::Positivity(c) => (Some(ExperimentKind::Positivity), c),
        Command::Convergence(c) => (Some(ExperimentKind::Convergence), c),
        Command::Run(c) => (None, c),
    };
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("experiment.seed={seed}"));
    }
    if let Some(w) = common.workers {
        overrides.push(format!("experiment.workers={w}"));
    }
    let cfg = config::load(common.config.as_deref(), &overrides)?;
    let kind = kind.unwrap_or(cfg.experiment.kind);
    let env = std::env::var("CLAB_OUT").ok();
    let mut out = Outputs::create(resolve_out_dir(common.out.as_deref(), &cfg, env.as_deref()))?;
    let result = clab::par::with_workers(cfg.experiment.workers, || run::run(kind, &cfg, &mut out));
    // failed checks still leave a manifest for the artifacts they wrote
    let manifest = out.finish(RunInfo { command: kind.name(), config: &cfg, overrides: &overrides })?;
    result.map(|line| format!("{line}\nmanifest: {}", manifest.display()))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(line) => {
            // a closed pipe is not an error of the run
            let _ = writeln!(std::io::stdout(), "{line}");
            ExitCode::from(EXIT_OK)
        }
        Err(e) => {
            eprintln!("clab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
