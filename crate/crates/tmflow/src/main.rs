use std::process::ExitCode;

use clap::Parser;

use tmflow::cli::{dispatch, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match dispatch(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tmflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
