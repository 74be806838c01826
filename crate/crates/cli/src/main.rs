use std::io;
use std::process::ExitCode;

use batchps::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("batchps: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
