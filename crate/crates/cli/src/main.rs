use std::path::PathBuf;
use std::process::ExitCode;

use bntsp_cli::{cmd_evaluate, cmd_export, cmd_ingest, cmd_learn, CliError, ExportFormat, Overrides, RunConfig, Solver};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bntsp", version, about = "Bayesian network structure learning over variable orderings")]
struct Cli {
    /// Experiment config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// dp, kopt2, kopt3 or lkh-external
    #[arg(long, global = true)]
    solver: Option<Solver>,
    /// Output directory, overriding the config
    #[arg(long = "out", global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    lkh_path: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Clean, discretise and split the raw data
    Ingest,
    /// Search for an ordering and learn the network
    Learn,
    /// Fit CPTs and run the prediction tasks
    Evaluate,
    /// Write the network or the ATSP instance in another format
    Export {
        #[arg(long, default_value = "dot")]
        format: ExportFormat,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        solver: cli.solver,
        output_dir: cli.out,
        lkh_path: cli.lkh_path,
    })?;
    match cli.command {
        Cmd::Ingest => print!("{}", cmd_ingest(&cfg)?),
        Cmd::Learn => print!("{}", cmd_learn(&cfg)?),
        Cmd::Evaluate => print!("{}", cmd_evaluate(&cfg)?),
        Cmd::Export { format } => println!("{}", cmd_export(&cfg, format)?.display()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bntsp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
