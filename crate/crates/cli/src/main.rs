use std::process::ExitCode;

use clap::Parser;

use endogarble_tool::args::Cli;

fn main() -> ExitCode {
    // Usage errors exit with status 2; --help and --version with 0.
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match endogarble_tool::run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
