//! `stokes`: command-line front end.
//!
//! Reports are pretty JSON (CSV for `plot-data`) written to `--out` or stdout.
//! Exit codes: 0 success, 1 a check failed, 2 bad input.

mod commands;
mod config;
mod spaces;

use std::process::ExitCode;

use clap::Parser;
use config::{Cli, CliError, Command, RunConfig};

fn dispatch(command: Command, cfg: &RunConfig) -> Result<commands::Output, CliError> {
    cfg.validate()?;
    match command {
        Command::Stokes => commands::stokes(cfg),
        Command::Verify => commands::verify(cfg),
        Command::Stability => commands::stability(cfg),
        Command::Genericity => commands::genericity(cfg),
        Command::Dims => commands::dims(cfg),
        Command::Braid => commands::braid(cfg),
        Command::Vdb => commands::vdb(cfg),
        Command::PlotData => commands::plot_data(cfg),
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("--out {}: {}", p.display(), e))),
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = dispatch(cli.command, &cli.run).and_then(|out| {
        emit(&cli.run, &out.text)?;
        if out.passed {
            Ok(())
        } else {
            Err(CliError::Failed("a check failed; see the report".into()))
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.to_string(), "exit_code": e.code() });
            eprintln!("{}", body);
            ExitCode::from(e.code() as u8)
        }
    }
}
