//! Flat `key=value` config files, merged into the command line.
//!
//! Each key names a flag of the chosen command (`_` and `-` are equivalent).
//! `key=true` sets a switch, `key=false` leaves it unset, anything else is
//! passed as `--key=value`. The optional key `command` selects the command
//! when none is given on the command line. Flags given on the command line
//! win over the file.

use std::fs;

use crate::CliError;

/// Global options that take a value, so the scan for the command name can
/// skip their arguments.
const VALUE_FLAGS: [&str; 3] = ["--config", "--output", "--format"];

pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        entries.push((key, value.trim().to_string()));
    }
    Ok(entries)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        if a == "--config" {
            return iter.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Index of the command name in `args` (which excludes the program name).
fn command_index(args: &[String]) -> Option<usize> {
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        if VALUE_FLAGS.contains(&a.as_str()) {
            i += 2;
            continue;
        }
        if !a.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// Returns the argument list with the config file's entries spliced in right
/// after the command name, ahead of the command-line flags.
pub fn expand(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some((program, rest)) = args.split_first() else {
        return Ok(args);
    };
    let Some(path) = config_path(rest) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    let entries = parse(&text)?;
    let mut flags = Vec::new();
    let mut command = None;
    for (key, value) in entries {
        match (key.as_str(), value.as_str()) {
            ("command", _) => command = Some(value),
            ("config", _) => return Err(CliError::Usage("config files cannot nest".into())),
            (_, "true") => flags.push(format!("--{key}")),
            (_, "false") => {}
            _ => flags.push(format!("--{key}={value}")),
        }
    }
    let mut out = vec![program.clone()];
    match command_index(rest) {
        Some(i) => {
            out.extend_from_slice(&rest[..=i]);
            out.extend(flags);
            out.extend_from_slice(&rest[i + 1..]);
        }
        None => {
            let command = command.ok_or_else(|| {
                CliError::Usage("no command given on the command line or in the config".into())
            })?;
            out.extend_from_slice(rest);
            out.push(command);
            out.extend(flags);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parse_lines() {
        let e = parse("# c\n\nseed = 5\nmax_n=3\n").unwrap();
        assert_eq!(
            e,
            vec![("seed".into(), "5".into()), ("max-n".into(), "3".into())]
        );
        assert!(parse("oops").is_err());
        assert!(parse("=3").is_err());
    }

    #[test]
    fn command_detection_skips_flag_values() {
        assert_eq!(
            command_index(&strings(&["--output", "x", "triples", "--n", "2"])),
            Some(2)
        );
        assert_eq!(command_index(&strings(&["--config=c"])), None);
    }

    #[test]
    fn no_config_is_identity() {
        let a = strings(&["xorlab", "triples", "--n", "2"]);
        assert_eq!(expand(a.clone()).unwrap(), a);
    }
}
