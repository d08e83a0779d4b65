//! `key = value` configuration files, expanded into flags placed ahead of
//! the command-line flags so the latter win.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Syntax(String),
}

/// Value of `--config` in raw arguments, if present.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax(format!("line {}: expected `key = value`", i + 1)));
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(ConfigError::Syntax(format!("line {}: empty key", i + 1)));
        }
        pairs.push((key, v.trim().trim_matches('"').to_string()));
    }
    Ok(pairs)
}

/// Index just past the subcommand name, and the name.
fn subcommand_position(args: &[OsString]) -> Option<(usize, String)> {
    let cmd = Cli::command();
    args.iter().enumerate().skip(1).find_map(|(i, a)| {
        let s = a.to_string_lossy();
        cmd.find_subcommand(s.as_ref()).map(|_| (i + 1, s.into_owned()))
    })
}

/// Arguments with the configuration file expanded. Keys that the selected
/// command does not accept are rejected.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path))
        .map_err(|e| ConfigError::Io(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let pairs = parse(&text)?;
    let Some((at, name)) = subcommand_position(&args) else {
        return Ok(args);
    };
    let root = Cli::command();
    let sub = root.find_subcommand(&name).expect("subcommand was found above");
    let global = |key: &str| root.get_arguments().any(|a| a.get_long() == Some(key));
    let local = |key: &str| sub.get_arguments().any(|a| a.get_long() == Some(key));
    // Global flags go before the command, local ones after it; either way
    // they precede the flags given on the command line.
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for (key, value) in pairs {
        let slot = if key == "config" {
            return Err(ConfigError::Syntax("config files cannot include other config files".into()));
        } else if local(&key) {
            &mut after
        } else if global(&key) {
            &mut before
        } else {
            return Err(ConfigError::Syntax(format!("`{key}` is not a flag of `{name}`")));
        };
        slot.push(OsString::from(format!("--{key}")));
        slot.push(OsString::from(value));
    }
    let mut out = vec![args[0].clone()];
    out.extend(before);
    out.extend_from_slice(&args[1..at]);
    out.extend(after);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

/// Arguments needed to rerun a command: everything except the program name
/// and the output and config destinations.
pub fn replayable(args: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip_next = false;
    for a in args.iter().skip(1) {
        let s = a.to_string_lossy().into_owned();
        if skip_next {
            skip_next = false;
            continue;
        }
        if s == "--output" || s == "--config" {
            skip_next = true;
            continue;
        }
        if s.starts_with("--output=") || s.starts_with("--config=") {
            continue;
        }
        out.push(s);
    }
    out
}
