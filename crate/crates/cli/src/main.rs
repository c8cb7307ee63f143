use std::process::ExitCode;

use clap::Parser;
use ctdr_cli::{execute, Cli, CliError, SEED_ENV};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string().trim_end().to_string());
            eprintln!("CTDR-E{}: {err}", err.exit_code());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let (kind, args) = cli.command.split();
    let env_seed = std::env::var(SEED_ENV).ok();
    match execute(kind, &args, env_seed.as_deref()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("CTDR-E{}: {err}", err.exit_code());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
