//! The `percept` command and the HTTP session service behind `percept serve`.

pub mod commands;
pub mod service;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use commands::{Cli, CliError, Command};

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 2 for invalid flags or inputs, 1 for runtime failures.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match commands::run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
