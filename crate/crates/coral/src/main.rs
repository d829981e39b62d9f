use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coral::commands::{apply_overrides, cmd_eval, cmd_exp, cmd_gen, cmd_selftest, cmd_solve};
use coral::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "coral", version, about = "Offline policy learning with marginalized importance weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample offline, initial-state and model datasets.
    Gen,
    /// Solve the configured saddle problem on saved data.
    Solve,
    /// Score a saved solution against the exact optimum.
    Eval,
    /// Run a scripted experiment and write its report.
    Exp,
    /// Run the built-in invariant suites.
    Selftest,
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config", "a config file is required for this command"))?;
    coral::config::check_exists("--config", path)?;
    let mut cfg = RunConfig::load(path)?;
    apply_overrides(&mut cfg, cli.seed, cli.out.as_deref());
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen => {
            let m = cmd_gen(&load(cli)?)?;
            println!("wrote {} {} {} {}", m.instance.display(), m.offline.display(), m.initial.display(), m.model.display());
        }
        Command::Solve => {
            let (path, sol) = cmd_solve(&load(cli)?)?;
            println!("objective {} written to {}", sol.objective_value, path.display());
        }
        Command::Eval => {
            let (path, rec) = cmd_eval(&load(cli)?)?;
            println!("subopt {} written to {}", rec.subopt, path.display());
        }
        Command::Exp => {
            let (files, rep) = cmd_exp(&load(cli)?)?;
            for c in &rep.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {} {}", files.csv.display(), files.json.display());
        }
        Command::Selftest => {
            cmd_selftest(&mut std::io::stdout())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
