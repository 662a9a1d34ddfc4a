mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, EditCommand};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::ImportSoba(a) => commands::import_soba(a),
        Command::Validate(a) => commands::validate(a),
        Command::Stats(a) => commands::stats(a),
        Command::Eval(a) => commands::eval(a),
        Command::Pair(a) => commands::pair(a),
        Command::Augment(a) => commands::augment(a),
        Command::LossCheck(a) => commands::loss_check(a),
        Command::Light(a) => commands::light(a),
        Command::Edit(EditCommand::Remove(a)) => commands::edit_remove(a),
        Command::Edit(EditCommand::Transfer(a)) => commands::edit_transfer(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("soba: {e}");
            ExitCode::from(e.code())
        }
        Err(_) => {
            eprintln!("soba: internal error: a consistency check failed (see message above)");
            ExitCode::from(3)
        }
    }
}
