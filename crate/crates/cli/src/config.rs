//! Flat `key = value` run configs.
//!
//! Every file must declare `schema_version = 1`. Keys are the long flag names
//! of the subcommand with `-` written as `_`. Values are spliced in front of
//! the command-line arguments, so an explicit flag always wins.

use std::collections::BTreeMap;
use std::ffi::OsString;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        let mut version = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(format!("config line {}: empty key", i + 1));
            }
            if k == "schema_version" {
                version = Some(v.to_string());
                continue;
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(format!("config key '{k}' given twice"));
            }
        }
        match version.as_deref() {
            Some(SCHEMA_VERSION) => Ok(Self { entries }),
            Some(v) => Err(format!("unsupported config schema_version {v}")),
            None => Err("config is missing schema_version".into()),
        }
    }

    /// Rejects keys outside `allowed` (flag ids, `-` or `_` separated).
    pub fn check_keys<'a>(&self, allowed: impl IntoIterator<Item = &'a str>) -> Result<(), String> {
        let allowed: Vec<String> = allowed.into_iter().map(|a| a.replace('-', "_")).collect();
        for k in self.entries.keys() {
            if k == "config" || !allowed.iter().any(|a| a == k) {
                return Err(format!("unknown config key '{k}'"));
            }
        }
        Ok(())
    }

    pub fn to_args(&self) -> Vec<OsString> {
        self.entries
            .iter()
            .map(|(k, v)| OsString::from(format!("--{}={v}", k.replace('_', "-"))))
            .collect()
    }
}

/// Path given with `--config` in `args` (the arguments after the subcommand).
pub fn find_config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}
