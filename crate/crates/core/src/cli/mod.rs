//! Command-line driver: `amlab run <config>` and `amlab validate <config>`.
//!
//! Exit codes: 0 all pass flags true, 1 scenario failed or invalid,
//! 2 configuration or I/O error, 3 numerical error.

mod config;
mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{
    emit_config, parse_config, BuiltModel, DataName, FamilyName, FieldSource, Format, GridBlock, ModelBlock,
    OutputBlock, ProbeBlock, RunConfig, ScenarioBlock, TableBlock,
};
pub use run::{run_scenario, write_artifacts, RunOutcome};

use crate::error::Error;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "amlab", version, about = "Regularized Aronsson equations: solver, adjoint and barrier experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the global seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse a config and print it with all defaults resolved.
    Validate { config: PathBuf },
}

pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Numerical { .. } | Error::Domain(_) => EXIT_NUMERICAL,
        Error::Config(_) | Error::Input(_) | Error::Io(_) => EXIT_CONFIG,
    }
}

fn load(path: &PathBuf) -> crate::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Executes a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Validate { config } => load(&config).and_then(|c| {
            print!("{}", emit_config(&c)?);
            Ok(EXIT_PASS)
        }),
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => (|| {
            let mut c = load(&config)?;
            if let Some(seed) = seed {
                c.seed = seed;
            }
            if let Some(k) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                    .map_err(|e| Error::Config(format!("cannot set thread count: {e}")))?;
            }
            let dir = out.unwrap_or_else(|| PathBuf::from(&c.output.directory));
            let outcome = run_scenario(&c)?;
            write_artifacts(&c, &outcome, &dir)?;
            println!("{}: {}", outcome.status, dir.display());
            for name in &outcome.failing {
                println!("  failed: {name}");
            }
            Ok(if outcome.pass { EXIT_PASS } else { EXIT_FAIL })
        })(),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}
