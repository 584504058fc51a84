mod args;
mod commands;
mod emit;
mod error;
mod scenario;
mod state_spec;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::emit::Emission;
use crate::error::{CliError, CliResult, EXIT_INVARIANT};

/// Fills the sampling parameters a command did not set from the global flags.
fn apply_globals(command: Command, cli: &Cli) -> Command {
    match command {
        Command::KsPredict(mut p) => {
            p.trials = Some(p.trials.unwrap_or(cli.trials));
            p.seed = Some(p.seed.unwrap_or(cli.seed));
            Command::KsPredict(p)
        }
        Command::Apparatus(mut p) => {
            p.trials = Some(p.trials.unwrap_or(cli.trials));
            p.seed = Some(p.seed.unwrap_or(cli.seed));
            Command::Apparatus(p)
        }
        other => other,
    }
}

fn execute(cli: &Cli) -> CliResult<Emission> {
    let command = match (&cli.scenario_file, &cli.command) {
        (Some(path), None) => scenario::read_scenario(path)?,
        (None, Some(c)) => c.clone(),
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "give either a subcommand or --scenario-file, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Parse("no subcommand given (see --help)".into()));
        }
    };
    match apply_globals(command, cli) {
        Command::Commutators => commands::commutators(),
        Command::KsPredict(p) => commands::ks_predict(&p),
        Command::Apparatus(p) => commands::apparatus_cmd(&p),
        Command::Counterfactual(p) => commands::counterfactual_cmd(&p),
        Command::Verify(p) => commands::verify_cmd(&p),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = execute(&cli).and_then(|e| Ok((e.render(cli.format, cli.deterministic)?, e)));
    match result {
        Ok((out, emission)) => {
            for w in &emission.warnings {
                eprintln!("warning: {w}");
            }
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(3);
            }
            if emission.failures > 0 {
                ExitCode::from(EXIT_INVARIANT as u8)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
