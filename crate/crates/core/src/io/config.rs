//! `key = value` settings files and weight tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::{ReaderBuilder, Trim};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    value: String,
    line: u64,
}

/// Parsed settings file. Lines are `key = value`; `#` starts a comment and
/// blank lines are ignored. Keys are case-sensitive and may not repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigFile {
    origin: PathBuf,
    entries: BTreeMap<String, Entry>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?;
        ConfigFile::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<ConfigFile> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i as u64 + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err =
                |msg: String| Error::Configuration(format!("{}:{line}: {msg}", origin.display()));
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(err(format!("invalid key '{key}'")));
            }
            if value.is_empty() {
                return Err(err(format!("'{key}' has no value")));
            }
            let key = key.replace('-', "_");
            if let Some(prev) = entries.get(&key) {
                let prev: &Entry = prev;
                return Err(err(format!("'{key}' already set on line {}", prev.line)));
            }
            entries.insert(
                key,
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }
        Ok(ConfigFile {
            origin: origin.to_path_buf(),
            entries,
        })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    /// Typed lookup; a value that does not parse is an error naming its line.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| {
                Error::Configuration(format!(
                    "{}:{}: bad value '{}' for '{key}': {err}",
                    self.origin.display(),
                    e.line,
                    e.value
                ))
            }),
        }
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self
            .entries
            .iter()
            .find(|(k, _)| !allowed.contains(&k.as_str()))
        {
            None => Ok(()),
            Some((k, e)) => Err(Error::Configuration(format!(
                "{}:{}: unknown setting '{k}'",
                self.origin.display(),
                e.line
            ))),
        }
    }
}

/// Reads a weight table with `name` and `weight` columns.
pub fn read_weights(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        line: 0,
        message: format!("cannot read file: {e}"),
    })?;
    parse_weights(&bytes, path)
}

pub fn parse_weights(bytes: &[u8], origin: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let err = |line: u64, message: String| Error::Ingest {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = ReaderBuilder::new()
        .delimiter(super::delimiter_for_path(origin))
        .trim(Trim::All)
        .from_reader(bytes);
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| err(1, format!("no column named '{name}'")))
    };
    let (name_col, weight_col) = (col("name")?, col("weight")?);
    let mut names = Vec::new();
    let mut weights = Vec::new();
    let mut seen = BTreeMap::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let name = &record[name_col];
        if name.is_empty() {
            return Err(err(line, "missing name".into()));
        }
        let weight = match record[weight_col].parse::<f64>() {
            Ok(w) if w.is_finite() && w > 0.0 => w,
            _ => {
                return Err(err(
                    line,
                    format!("weight '{}' is not a positive number", &record[weight_col]),
                ))
            }
        };
        if let Some(prev) = seen.insert(name.to_string(), line) {
            return Err(err(line, format!("'{name}' already listed on line {prev}")));
        }
        names.push(name.to_string());
        weights.push(weight);
    }
    if names.is_empty() {
        return Err(err(1, "no weights".into()));
    }
    Ok((names, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConfigFile> {
        ConfigFile::parse(text, Path::new("rise.conf"))
    }

    #[test]
    fn basic_settings() {
        let c = parse("# screening\nalpha = 0.01\n\nsplit-ratio=0.5 # trailing\nmode = tost\n")
            .unwrap();
        assert_eq!(c.get::<f64>("alpha").unwrap(), Some(0.01));
        assert_eq!(c.get::<f64>("split_ratio").unwrap(), Some(0.5));
        assert_eq!(c.raw("mode"), Some("tost"));
        assert_eq!(c.get::<f64>("power").unwrap(), None);
        assert!(c.reject_unknown(&["alpha", "split_ratio", "mode"]).is_ok());
        let e = c.reject_unknown(&["alpha"]).unwrap_err().to_string();
        assert!(
            e.contains("rise.conf:") && e.contains("unknown setting"),
            "{e}"
        );
    }

    #[test]
    fn bad_settings() {
        for text in ["alpha", "= 3", "alpha =", "a b = 1", "alpha = 1\nalpha = 2"] {
            assert!(parse(text).is_err(), "{text:?}");
        }
        let c = parse("\nseed = twelve\n").unwrap();
        let e = c.get::<u64>("seed").unwrap_err().to_string();
        assert!(e.contains("rise.conf:2"), "{e}");
    }

    #[test]
    fn weights_table() {
        let (n, w) =
            parse_weights(b"name,weight,mean\nA,2.5,0\nB,1e3,1\n", Path::new("w.csv")).unwrap();
        assert_eq!(n, ["A", "B"]);
        assert_eq!(w, [2.5, 1000.0]);
        for bad in [
            &b"name,weight\n"[..],
            b"name\nA\n",
            b"name,weight\nA,0\n",
            b"name,weight\nA,-1\n",
            b"name,weight\nA,inf\n",
            b"name,weight\nA,1\nA,2\n",
            b"name,weight\n,1\n",
        ] {
            assert!(parse_weights(bad, Path::new("w.csv")).is_err());
        }
    }
}
