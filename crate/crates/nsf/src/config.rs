//! Sectioned `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! [noise]
//! family = gaussian
//! sigma = 0.1
//! ```
//!
//! Every key a command reads is recorded together with its resolved value
//! (defaults included), and any key left unread is rejected by
//! [`Resolver::finish`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

pub const SECTIONS: [&str; 4] = ["noise", "analysis", "train", "io"];

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Section {
    header_line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parsed but not yet interpreted configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    sections: BTreeMap<String, Section>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RawConfig::default();
        let mut current: Option<String> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::config(line_no, format!("malformed section header `{line}`")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(CliError::config(
                        line_no,
                        format!("unknown section [{name}]; expected one of {}", SECTIONS.join(", ")),
                    ));
                }
                if cfg.sections.contains_key(name) {
                    return Err(CliError::config(line_no, format!("section [{name}] appears twice")));
                }
                cfg.sections.insert(
                    name.to_string(),
                    Section {
                        header_line: line_no,
                        entries: BTreeMap::new(),
                    },
                );
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(line_no, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(CliError::config(line_no, "empty key"));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| CliError::config(line_no, format!("key `{key}` appears before any section header")))?;
            let entries = &mut cfg.sections.get_mut(section).expect("section exists").entries;
            if entries.contains_key(key) {
                return Err(CliError::config(line_no, format!("duplicate key `{key}` in [{section}]")));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line: line_no,
                },
            );
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets or replaces a value, as a command-line override would.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let s = self.sections.entry(section.to_string()).or_insert(Section {
            header_line: 0,
            entries: BTreeMap::new(),
        });
        s.entries.insert(
            key.to_string(),
            Entry {
                value: value.into(),
                line: 0,
            },
        );
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.entries.get(key))
    }
}

/// Typed, recording view of a [`RawConfig`].
#[derive(Debug)]
pub struct Resolver {
    raw: RawConfig,
    used: BTreeSet<(String, String)>,
    resolved: BTreeMap<String, Vec<(String, String)>>,
}

impl Resolver {
    pub fn new(raw: RawConfig) -> Self {
        Self {
            raw,
            used: BTreeSet::new(),
            resolved: BTreeMap::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self::new(RawConfig::parse(text)?))
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.raw.entry(section, key).is_some()
    }

    fn record(&mut self, section: &str, key: &str, value: String) {
        let list = self.resolved.entry(section.to_string()).or_default();
        match list.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => list.push((key.to_string(), value)),
        }
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        let e = self.raw.entry(section, key).cloned()?;
        self.used.insert((section.to_string(), key.to_string()));
        Some(e)
    }

    fn parse_entry<T: FromStr>(section: &str, key: &str, e: &Entry) -> Result<T>
    where
        T::Err: Display,
    {
        e.value.parse::<T>().map_err(|err| {
            CliError::config(e.line, format!("[{section}] {key} = `{}`: {err}", e.value))
        })
    }

    /// Value of `key`, or `default` when absent.
    pub fn get<T: FromStr + Display>(&mut self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        let v = match self.take(section, key) {
            Some(e) => Self::parse_entry(section, key, &e)?,
            None => default,
        };
        self.record(section, key, v.to_string());
        Ok(v)
    }

    /// Value of a key with no default.
    pub fn require<T: FromStr + Display>(&mut self, section: &str, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        match self.take(section, key) {
            Some(e) => {
                let v: T = Self::parse_entry(section, key, &e)?;
                self.record(section, key, v.to_string());
                Ok(v)
            }
            None => {
                let line = self.raw.sections.get(section).map_or(0, |s| s.header_line);
                Err(CliError::config(line, format!("missing key `{key}` in [{section}]")))
            }
        }
    }

    /// Raw string value, if present.
    pub fn optional(&mut self, section: &str, key: &str) -> Option<String> {
        let e = self.take(section, key)?;
        self.record(section, key, e.value.clone());
        Some(e.value)
    }

    /// Line of a key (0 when absent or set programmatically).
    pub fn line_of(&self, section: &str, key: &str) -> usize {
        self.raw.entry(section, key).map_or(0, |e| e.line)
    }

    /// Rejects keys no command consumed, reporting the earliest one.
    pub fn finish(&self) -> Result<()> {
        let mut unknown: Vec<(usize, String, String)> = Vec::new();
        for (name, section) in &self.raw.sections {
            for (key, e) in &section.entries {
                if !self.used.contains(&(name.clone(), key.clone())) {
                    unknown.push((e.line, name.clone(), key.clone()));
                }
            }
        }
        match unknown.into_iter().min() {
            Some((line, section, key)) => Err(CliError::config(line, format!("unknown key `{key}` in [{section}]"))),
            None => Ok(()),
        }
    }

    /// The fully resolved configuration in the input syntax.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for name in SECTIONS {
            let Some(list) = self.resolved.get(name) else { continue };
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in list {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// Comma-separated list of items.
pub fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

/// A boolean accepting `true/false`, `yes/no` and `1/0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Flag(pub bool);

impl FromStr for Flag {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "true" | "yes" | "1" => Ok(Flag(true)),
            "false" | "no" | "0" => Ok(Flag(false)),
            _ => Err(format!("expected true or false, got `{s}`")),
        }
    }
}

impl Display for Flag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let mut r = Resolver::parse("# top\n[noise]\nfamily = gaussian # trailing\nsigma=0.25\n\n[io]\nseed = 4\n").unwrap();
        assert_eq!(r.require::<String>("noise", "family").unwrap(), "gaussian");
        assert_eq!(r.get("noise", "sigma", 1.0).unwrap(), 0.25);
        assert_eq!(r.get("io", "seed", 0u64).unwrap(), 4);
        assert_eq!(r.get("io", "height", 64usize).unwrap(), 64);
        r.finish().unwrap();
        assert_eq!(r.echo(), "[noise]\nfamily = gaussian\nsigma = 0.25\n\n[io]\nseed = 4\nheight = 64\n");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RawConfig::parse("[noise]\nsigma 0.1\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 2, .. }), "{err}");
        let err = RawConfig::parse("[bogus]\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 1, .. }));
        let err = RawConfig::parse("x = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 1, .. }));
        let err = RawConfig::parse("[io]\nseed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 3, .. }));

        let mut r = Resolver::parse("[io]\n\n[noise]\nfamily = gaussian\nsgima = 0.1\n").unwrap();
        let err = r.require::<f64>("noise", "sigma").unwrap_err();
        assert!(matches!(err, CliError::Config { line: 3, .. }));
        assert!(err.to_string().contains("sigma"));
        r.require::<String>("noise", "family").unwrap();
        let err = r.finish().unwrap_err();
        assert!(matches!(err, CliError::Config { line: 5, .. }));
        assert!(err.to_string().contains("sgima"));

        let mut r = Resolver::parse("[io]\nseed = x\n").unwrap();
        assert!(matches!(r.get("io", "seed", 0u64), Err(CliError::Config { line: 2, .. })));
    }

    #[test]
    fn overrides_replace_values() {
        let mut raw = RawConfig::parse("[io]\nseed = 1\n").unwrap();
        raw.set("io", "seed", "9");
        let mut r = Resolver::new(raw);
        assert_eq!(r.get("io", "seed", 0u64).unwrap(), 9);
        assert_eq!(r.line_of("io", "seed"), 0);
    }

    #[test]
    fn flags() {
        assert_eq!("yes".parse::<Flag>().unwrap(), Flag(true));
        assert_eq!("0".parse::<Flag>().unwrap(), Flag(false));
        assert!("maybe".parse::<Flag>().is_err());
    }
}
