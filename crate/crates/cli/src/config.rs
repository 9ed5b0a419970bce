//! Plain `key=value` settings files.
//!
//! Blank lines and `#` comments are ignored; keys may use `-` or `_`.
//! Keys under `result.` are outputs of an earlier run (a manifest is a
//! valid settings file) and are skipped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    source: PathBuf,
    map: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn load(path: &Path, known: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, path, known)
    }

    pub fn parse(text: &str, source: &Path, known: &[&str]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", source.display(), lineno + 1))?;
            let key = k.trim().replace('-', "_");
            if key.starts_with("result.") {
                continue;
            }
            if !known.contains(&key.as_str()) {
                bail!("{}:{}: unknown key `{key}`", source.display(), lineno + 1);
            }
            map.insert(key, v.trim().to_string());
        }
        Ok(Self { source: source.to_path_buf(), map })
    }

    /// Parses `key` if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.map
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("{}: bad value `{v}` for `{key}`: {e}", self.source.display()))
            })
            .transpose()
    }
}

/// Command-line value if given, else the file value, else `None`.
pub fn overlay<T: FromStr>(cli: Option<T>, file: Option<&KeyValues>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match (cli, file) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some(f)) => f.get(key),
        (None, None) => Ok(None),
    }
}
