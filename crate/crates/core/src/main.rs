use std::process::ExitCode;

use clap::Parser;
use fracpow::cli::{run, Cli};
use fracpow::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            let status = if outcome.pass { "pass" } else { "FAIL" };
            println!("{status}: {}", outcome.dir.display());
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
