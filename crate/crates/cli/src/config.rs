//! `--config <file>` support: flat `key = value` lines, `#` comments.
//!
//! File entries are turned into `--key value` arguments and spliced in
//! right after the subcommand, ahead of the real flags. Every subcommand
//! lets an argument override itself, so a flag given on the command line
//! beats the same key from the file.

use std::path::Path;

use clap::CommandFactory;

use crate::args::Cli;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parses `key = value` text into `(key, value)` pairs in file order.
pub fn parse(text: &str, origin: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            ConfigError(format!("{}:{}: expected `key = value`", origin.display(), i + 1))
        })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(ConfigError(format!("{}:{}: empty key", origin.display(), i + 1)));
        }
        out.push((key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Long flag names the subcommand accepts, minus `config` itself.
fn known_keys(subcommand: &str) -> Option<Vec<String>> {
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(subcommand)?;
    Some(
        sub.get_arguments()
            .filter_map(|a| a.get_long())
            .filter(|l| *l != "config")
            .map(str::to_string)
            .collect(),
    )
}

fn config_path(rest: &[String]) -> Option<String> {
    let mut it = rest.iter();
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Returns `argv` with the config file's entries inserted after the
/// subcommand. Leaves `argv` alone when no `--config` is present or the
/// subcommand is unknown (clap reports that itself).
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, ConfigError> {
    // first bare word after the program name is the subcommand
    let Some(sub_pos) = argv.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(argv);
    };
    let Some(path) = config_path(&argv[sub_pos + 1..]) else {
        return Ok(argv);
    };
    let Some(known) = known_keys(&argv[sub_pos]) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let mut injected = Vec::new();
    for (key, value) in parse(&text, path)? {
        if !known.contains(&key) {
            return Err(ConfigError(format!(
                "{}: unknown key `{key}` for `{}`",
                path.display(),
                argv[sub_pos]
            )));
        }
        injected.push(format!("--{key}={value}"));
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn comments_and_blank_lines() {
        let kv = parse("# top\n\nalpha = 0.01  # trailing\nbn=true\n", Path::new("c")).unwrap();
        assert_eq!(kv, vec![("alpha".into(), "0.01".into()), ("bn".into(), "true".into())]);
    }

    #[test]
    fn missing_equals_is_error() {
        assert!(parse("alpha 0.1\n", Path::new("c")).is_err());
    }

    #[test]
    fn no_config_is_untouched() {
        let a = argv("finn train --data x --out y");
        assert_eq!(expand(a.clone()).unwrap(), a);
    }

    #[test]
    fn file_entries_precede_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, "epochs = 3\nalpha = 0.5\n").unwrap();
        let a = argv(&format!("finn -v train --config {} --alpha 0.1", p.display()));
        let e = expand(a).unwrap();
        assert_eq!(&e[..5], &argv("finn -v train --epochs=3 --alpha=0.5")[..]);
        assert_eq!(e.last().unwrap(), "0.1");
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.conf");
        std::fs::write(&p, "learning-rate = 0.1\n").unwrap();
        let err = expand(argv(&format!("finn train --config {}", p.display()))).unwrap_err();
        assert!(err.0.contains("learning-rate"), "{err}");
    }
}
