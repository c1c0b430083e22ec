use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dicke_cli::error::EXIT_CONFIG;
use dicke_cli::{execute, load_config, CliError, RunOptions, Verb};

/// Simulate and analyse collective emission of driven dipole-coupled atoms.
#[derive(Debug, Parser)]
#[command(name = "dicke", version)]
struct Cli {
    #[command(subcommand)]
    verb: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the ensemble seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Also write every realization's trajectory (`simulate` only).
    #[arg(long, global = true)]
    keep_realizations: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one ensemble and analyse its mean trajectory.
    Simulate,
    /// Run the ensemble for every pulse duration in `[sweep]`.
    Sweep,
    /// Re-run the decay analysis on a stored trajectory file.
    Analyze {
        /// Trajectory CSV; defaults to the configured trajectory file in `--out-dir`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config: required".into()))?;
    let cfg = load_config(&path)?;
    let (verb, input) = match cli.verb {
        Command::Simulate => (Verb::Simulate, None),
        Command::Sweep => (Verb::Sweep, None),
        Command::Analyze { input } => (Verb::Analyze, input),
    };
    let opts = RunOptions {
        seed: cli.seed,
        jobs: cli.jobs,
        out_dir: cli.out_dir,
        keep_realizations: cli.keep_realizations,
        input,
    };
    let summary = execute(verb, &cfg, &opts)?;
    let failed = summary.rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} analysis rows failed", summary.rows.len());
    }
    for p in &summary.outputs {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
