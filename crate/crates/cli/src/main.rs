use std::process::ExitCode;

use clap::Parser;
use ellipsoidal_cli::cli::Cli;
use ellipsoidal_cli::commands::{run, JobConfig};
use ellipsoidal_cli::error::CliError;

fn execute(cli: Cli) -> Result<(), CliError> {
    let format = cli.common.format;
    let out = cli.common.out.clone();
    let cfg = JobConfig::from_cli(cli)?;
    run(&cfg)?.write(format, out.as_deref())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code)
        }
    }
}
