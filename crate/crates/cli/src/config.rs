//! Defaults from a `key = value` file, merged into the argument list before
//! parsing so that command-line flags always win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{Context, Result};
use clap::Command;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Flag(bool),
    Text(String),
}

/// Top-level keys apply to every subcommand; keys under `[name]` apply to
/// that subcommand only and override top-level ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub global: BTreeMap<String, Value>,
    pub sections: BTreeMap<String, BTreeMap<String, Value>>,
}

fn key(raw: &str) -> String {
    raw.trim().replace('_', "-")
}

fn from_toml(value: &toml::Value) -> Value {
    match value {
        toml::Value::Boolean(b) => Value::Flag(*b),
        toml::Value::String(s) => Value::Text(s.clone()),
        toml::Value::Array(items) => Value::Text(
            items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
        ),
        other => Value::Text(other.to_string()),
    }
}

/// Plain `key = value` lines, for files that are not valid TOML (unquoted
/// paths, for instance).
fn parse_lines(text: &str) -> Result<ConfigFile> {
    let mut out = ConfigFile::default();
    let mut section: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_owned());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("config line {}: expected key = value", i + 1))?;
        let v = v.trim().trim_matches('"');
        let value = match v {
            "true" => Value::Flag(true),
            "false" => Value::Flag(false),
            _ => Value::Text(v.to_owned()),
        };
        let target = match &section {
            Some(s) => out.sections.entry(s.clone()).or_default(),
            None => &mut out.global,
        };
        target.insert(key(k), value);
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<ConfigFile> {
    let Ok(table) = text.parse::<toml::Table>() else {
        return parse_lines(text);
    };
    let mut out = ConfigFile::default();
    for (k, v) in &table {
        match v {
            toml::Value::Table(inner) => {
                let section = out.sections.entry(k.clone()).or_default();
                for (ik, iv) in inner {
                    section.insert(key(ik), from_toml(iv));
                }
            }
            other => {
                out.global.insert(key(k), from_toml(other));
            }
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Value of `--config` in the argument list, if any.
pub fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn present(args: &[OsString], long: &str) -> bool {
    let flag = format!("--{long}");
    let with_value = format!("--{long}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_value)
    })
}

/// Inserts config defaults right after the innermost subcommand name, for
/// every key the subcommand accepts and the command line does not set.
pub fn merge(command: &Command, args: Vec<OsString>, config: &ConfigFile) -> Vec<OsString> {
    let mut cmd = command;
    let mut names = Vec::new();
    let mut insert_at = None;
    let mut skip_value = false;
    for (i, a) in args.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if skip_value {
            skip_value = false;
            continue;
        }
        if s == "--config" {
            skip_value = true;
            continue;
        }
        if s.starts_with('-') {
            continue;
        }
        match cmd.find_subcommand(s.as_ref()) {
            Some(sub) => {
                cmd = sub;
                names.push(sub.get_name().to_owned());
                insert_at = Some(i + 1);
            }
            None => break,
        }
    }
    let Some(at) = insert_at else {
        return args;
    };

    let mut merged: BTreeMap<&str, &Value> = config.global.iter().map(|(k, v)| (k.as_str(), v)).collect();
    for name in &names {
        if let Some(section) = config.sections.get(name) {
            merged.extend(section.iter().map(|(k, v)| (k.as_str(), v)));
        }
    }

    let mut extra: Vec<OsString> = Vec::new();
    for (k, v) in merged {
        let Some(arg) = cmd.get_arguments().find(|a| a.get_long() == Some(k)) else {
            if k != "config" {
                log::debug!("config key {k:?} does not apply to this subcommand");
            }
            continue;
        };
        if present(&args, k) {
            continue;
        }
        let takes_value = arg.get_action().takes_values();
        match (v, takes_value) {
            (Value::Flag(true), false) => extra.push(format!("--{k}").into()),
            (Value::Flag(false), false) => {}
            (Value::Flag(b), true) => extra.extend([format!("--{k}").into(), b.to_string().into()]),
            (Value::Text(t), true) => extra.extend([format!("--{k}").into(), t.into()]),
            (Value::Text(t), false) => {
                if t == "true" {
                    extra.push(format!("--{k}").into());
                }
            }
        }
    }
    let mut out = args;
    out.splice(at..at, extra);
    out
}
