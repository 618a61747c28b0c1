use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::{exit, CliError, CliResult};

const SWITCHES: &[&str] = &["probabilities"];

/// Replaces `--config FILE` with the `--key value` pairs read from `FILE`, placed
/// ahead of the command-line flags so that later flags take precedence.
pub fn expand_config_files(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            let value = iter
                .next()
                .ok_or_else(|| CliError::usage("--config needs a file path"))?;
            path = Some(value);
        } else if let Some(v) = text.strip_prefix("--config=") {
            path = Some(OsString::from(v));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    if rest.len() < 2 {
        return Err(CliError::usage("--config must follow a subcommand"));
    }
    let from_file = read_config(Path::new(&path))?;
    let tail = rest.split_off(2);
    rest.extend(from_file);
    rest.extend(tail);
    Ok(rest)
}

fn read_config(path: &Path) -> CliResult<Vec<OsString>> {
    let text = fs::read_to_string(path).map_err(|e| CliError {
        code: exit::DATA,
        message: format!("{}: {e}", path.display()),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::usage(format!(
                "{} line {}: expected key=value",
                path.display(),
                i + 1
            )));
        };
        let key = key.trim().trim_start_matches('-').replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(CliError::usage(format!("{} line {}: nested config files are not supported", path.display(), i + 1)));
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" | "1" | "yes" => out.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                _ => {
                    return Err(CliError::usage(format!(
                        "{} line {}: {key} expects true or false",
                        path.display(),
                        i + 1
                    )))
                }
            }
        } else {
            out.push(OsString::from(format!("--{key}={value}")));
        }
    }
    Ok(out)
}
