mod args;
mod commands;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use mibids_core::snmp::SnmpError;

use args::{Cli, Config};

/// Exit codes: 0 success, 1 usage, 2 data, 3 transport.
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;

/// An error in how the tool was invoked rather than in the data.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<mibids_core::Error>() {
            return match e {
                mibids_core::Error::InvalidArgument(_) | mibids_core::Error::UnknownGroup(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
        if cause.is::<SnmpError>() {
            return EXIT_TRANSPORT;
        }
    }
    EXIT_DATA
}

/// A downstream reader such as `head` went away; not worth reporting.
fn closed_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<csv::Error>()
                .is_some_and(|e| matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe))
    })
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    let Some(path) = &cli.config else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = load_config(&cli).and_then(|cfg| {
        let quiet = cli.quiet || cfg.quiet.unwrap_or(false);
        env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }))
            .format_timestamp(None)
            .init();
        let ctx = commands::Context {
            seed: cli.seed.or(cfg.seed),
            quiet,
            report: cli.report.clone().or_else(|| cfg.report.clone()),
            cfg,
        };
        commands::run(cli.command, &ctx)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if closed_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
