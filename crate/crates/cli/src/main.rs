use std::process::ExitCode;

use baxlab_cli::{output_path, run, write_output, Cli, EXIT_PROPERTY};
use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            if let Err(e) = write_output(output_path(&cli), &outcome.text) {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
            if outcome.failed {
                eprintln!("property check failed; counterexample in the report");
                ExitCode::from(EXIT_PROPERTY as u8)
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
