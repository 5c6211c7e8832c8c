//! Command-line front end for the `endogarble` library.

pub mod args;
pub mod commands;
pub mod verify;

use std::io::Write;

use anyhow::Result;

use args::{Cli, Command, Format};

/// Exit status for a run whose results violate a tolerance or a check.
pub const EXIT_FAILED_CHECK: i32 = 1;

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    let seed = cli.seed();
    match &cli.command {
        Command::Serve(args) => {
            commands::serve_command(args, cli.seed)?;
            return Ok(0);
        }
        Command::Steal(args) => {
            let mut out = commands::open_output(cli.out.as_deref())?;
            commands::steal_command(args, seed, cli.format, &mut out)?;
        }
        Command::Tradeoff(args) => {
            let mut out = commands::open_output(cli.out.as_deref())?;
            commands::tradeoff(args, cli.format, &mut out)?;
            out.flush()?;
        }
        Command::Simulate(args) => {
            let mut out = commands::open_output(cli.out.as_deref())?;
            if let Some(v) = commands::simulate(args, seed, cli.format, &mut out)? {
                eprintln!("tolerance violated: {v}");
                return Ok(EXIT_FAILED_CHECK);
            }
        }
        Command::Verify => {
            let checks = verify::run_all(seed);
            let mut out = commands::open_output(cli.out.as_deref())?;
            match cli.format {
                Format::Csv => {
                    for c in &checks {
                        writeln!(out, "{c}")?;
                    }
                }
                Format::Json => {
                    serde_json::to_writer_pretty(&mut out, &checks)?;
                    writeln!(out)?;
                }
            }
            out.flush()?;
            if checks.iter().any(|c| !c.passed) {
                return Ok(EXIT_FAILED_CHECK);
            }
        }
    }
    Ok(0)
}
