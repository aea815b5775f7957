use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(amlab::cli::execute(amlab::cli::Cli::parse()))
}
