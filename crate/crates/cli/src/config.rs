//! Flat key-value config files. CLI flags override file values; defaults
//! apply last.
//!
//! Format: one `key = value` per line, `#` starts a comment. Aliases are a
//! semicolon-separated list of `surface=LABEL` pairs.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config {} line {}: expected key = value", path.display(), i + 1);
            };
            values.insert(key.trim().to_owned(), value.trim().to_owned());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}: {e}"),
            },
        }
    }

    /// Parses the `aliases` key: `surface=LABEL;surface=LABEL`.
    pub fn aliases(&self) -> Result<Vec<(String, String)>> {
        let Some(raw) = self.get("aliases") else {
            return Ok(Vec::new());
        };
        let mut pairs = Vec::new();
        for entry in raw.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let Some((surface, label)) = entry.split_once('=') else {
                bail!("config key aliases: expected surface=LABEL, got {entry:?}");
            };
            pairs.push((surface.trim().to_owned(), label.trim().to_owned()));
        }
        Ok(pairs)
    }
}

/// Flag value, then config value, then default.
pub fn resolve<T: Clone>(flag: Option<T>, config: Result<Option<T>>, default: T) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(config?.unwrap_or(default))
}

/// Flag value, then config value; `None` when neither is set.
pub fn resolve_opt<T: Clone>(flag: Option<T>, config: Result<Option<T>>) -> Result<Option<T>> {
    if let Some(v) = flag {
        return Ok(Some(v));
    }
    config
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_key_values_and_comments() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# comment").unwrap();
        writeln!(file, "stride = 2").unwrap();
        writeln!(file, "endpoint = mock:answers.jsonl # trailing").unwrap();
        writeln!(file, "aliases = crosscourt=CC; downline=DL").unwrap();
        let cfg = FileConfig::load(file.path()).unwrap();
        assert_eq!(cfg.get_parsed::<u32>("stride").unwrap(), Some(2));
        assert_eq!(cfg.get("endpoint"), Some("mock:answers.jsonl"));
        assert_eq!(
            cfg.aliases().unwrap(),
            vec![
                ("crosscourt".to_owned(), "CC".to_owned()),
                ("downline".to_owned(), "DL".to_owned())
            ]
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "just a line").unwrap();
        assert!(FileConfig::load(file.path()).is_err());
    }
}
