//! `anfb` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error,
//! 3 verification failed (ledger integrity or suite thresholds).

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("anfb: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
