//! Optional `key=value` defaults file. Keys are long flag names of the
//! invoked subcommand; `#` starts a comment.

use std::ffi::OsString;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, CommandFactory};

use crate::args::Cli;
use crate::CliError;

pub fn read(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key=value, got `{line}`", i + 1)));
        };
        entries.push((key.trim().replace('_', "-"), value.trim().to_string()));
    }
    Ok(entries)
}

/// Extra arguments supplying config values for flags not given on the
/// command line.
pub fn extra_args(entries: &[(String, String)], matches: &ArgMatches) -> Result<Vec<OsString>, CliError> {
    let Some((name, sub)) = matches.subcommand() else { return Ok(Vec::new()) };
    let root = Cli::command();
    let cmd = root.find_subcommand(name).expect("matched subcommand exists");
    let mut extra = Vec::new();
    for (key, value) in entries {
        let Some(arg) = cmd.get_arguments().find(|a| a.get_long() == Some(key.as_str()) && key != "config") else {
            return Err(CliError::Usage(format!("config key `{key}` is not a flag of `{name}`")));
        };
        if sub.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        let flag = OsString::from(format!("--{key}"));
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" => extra.push(flag),
                "false" | "0" | "no" => {}
                other => return Err(CliError::Usage(format!("config key `{key}` expects true or false, got `{other}`"))),
            },
            _ => {
                extra.push(flag);
                let multi = arg.get_num_args().is_some_and(|r| r.max_values() > 1);
                if multi {
                    extra.extend(value.split_whitespace().map(OsString::from));
                } else {
                    extra.push(OsString::from(value));
                }
            }
        }
    }
    Ok(extra)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let e = parse("# defaults\ntrials = 500\n\nemit_samples=true # keep\n").unwrap();
        assert_eq!(e, [("trials".to_string(), "500".to_string()), ("emit-samples".to_string(), "true".to_string())]);
        assert!(parse("trials 5").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let argv = ["aerotag", "accuracy", "--trials", "7"];
        let matches = Cli::command().try_get_matches_from(argv).unwrap();
        let entries = parse("trials=500\nseed=9\njson=true").unwrap();
        let extra = extra_args(&entries, &matches).unwrap();
        assert_eq!(extra, ["--seed", "9", "--json"].map(OsString::from));
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let matches = Cli::command().try_get_matches_from(["aerotag", "accuracy"]).unwrap();
        let entries = parse("port=1").unwrap();
        assert!(matches!(extra_args(&entries, &matches), Err(CliError::Usage(_))));
    }
}
