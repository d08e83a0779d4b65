mod args;
mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use herald_core::{Error, VERSION};
use serde_json::{json, Map, Value as Json};

use crate::args::Cli;
use crate::config::ConfigError;

/// Failure with its process exit status.
struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl Failure {
    fn new(kind: &'static str, message: impl Into<String>, code: u8) -> Self {
        Self {
            kind,
            message: message.into(),
            code,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (kind, code) = match &e {
            Error::InvalidParameter { .. } => ("invalid_parameter", 2),
            Error::Domain(_) => ("domain", 2),
            Error::UnknownFigure(_) => ("unknown_figure", 2),
            Error::NumericalAccuracy(_) => ("numerical_accuracy", 3),
            Error::InfeasibleEvent(_) => ("infeasible_event", 3),
            Error::InsufficientStatistics { .. } => ("insufficient_statistics", 4),
            Error::UndefinedQ => ("undefined_q", 1),
            Error::NotFound(_) => ("not_found", 1),
        };
        Failure::new(kind, e.to_string(), code)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(m) => Failure::new("io", m, 1),
            ConfigError::Syntax(m) => Failure::new("config", m, 2),
        }
    }
}

fn run(raw: Vec<OsString>) -> Result<(), Failure> {
    let argv = config::expand(raw)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit();
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            return Err(Failure::new("usage", first, 2));
        }
    };

    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::new("invalid_parameter", "--threads must be at least 1", 2));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new("threads", e.to_string(), 1))?;
    }

    let outcome = commands::run(&cli.command)?;

    let mut meta = Map::new();
    meta.insert("command".into(), json!(cli.command.name()));
    meta.insert("version".into(), json!(VERSION));
    meta.insert("params".into(), outcome.params);
    meta.insert("args".into(), json!(config::replayable(&argv)));
    meta.insert("eps".into(), json!(outcome.eps));
    meta.insert("tail_bounds".into(), outcome.tail_bounds);
    meta.insert("seed".into(), json!(outcome.seed));
    meta.extend(outcome.extra);

    let text = output::render(cli.format, Json::Object(meta), &outcome.data)
        .map_err(|e| Failure::new("io", e.to_string(), 1))?;
    match &cli.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::new("io", format!("cannot write {}: {e}", path.display()), 1))?,
        None => {
            // A closed downstream pipe (e.g. `| head`) is not an error.
            let mut out = io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                    return Err(Failure::new("io", format!("cannot write output: {e}"), 1))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = json!({"error": {"kind": f.kind, "message": f.message, "exit_code": f.code}});
            eprintln!("{line}");
            ExitCode::from(f.code)
        }
    }
}
