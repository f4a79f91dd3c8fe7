//! Command-line front end: `synth`, `var`, `diagnostics` and `analyze`.
//!
//! Output CSVs carry 12 significant digits and are written atomically.
//! Exit codes: 0 success, 2 config error, 3 input error, 4 numerical failure
//! that aborted the run.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{Cli, Command, RunConfig};
pub use error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => commands::cmd_synth(a),
        Command::Var(a) => commands::cmd_var(a),
        Command::Diagnostics(a) => commands::cmd_diagnostics(a),
        Command::Analyze(a) => commands::cmd_analyze(a),
    }
}
