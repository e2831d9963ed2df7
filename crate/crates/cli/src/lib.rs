//! `qtomo` command-line front end.

pub mod args;
pub mod commands;
pub mod config;
pub mod dataset;

use std::ffi::OsString;

use clap::{CommandFactory, Parser};

use crate::args::Cli;
use crate::commands::UsageError;
use crate::config::{find_config_path, RunConfig};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Inserts config-file values right after the subcommand name.
fn splice_config(argv: Vec<OsString>) -> Result<Vec<OsString>, (i32, String)> {
    if argv.len() < 2 {
        return Ok(argv);
    }
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&argv[1]) else {
        return Ok(argv);
    };
    let Some(path) = find_config_path(&argv[2..]) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| {
        (
            EXIT_RUNTIME,
            format!("reading config {}: {e}", path.to_string_lossy()),
        )
    })?;
    let cfg = RunConfig::parse(&text).map_err(|e| (EXIT_USAGE, e))?;
    cfg.check_keys(sub.get_arguments().map(|a| a.get_id().as_str()))
        .map_err(|e| (EXIT_USAGE, e))?;
    let mut out = argv[..2].to_vec();
    out.extend(cfg.to_args());
    out.extend_from_slice(&argv[2..]);
    Ok(out)
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match splice_config(argv) {
        Ok(a) => a,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
