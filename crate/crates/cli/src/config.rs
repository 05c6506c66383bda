//! Flat key-value run configuration.
//!
//! A config file holds `key = value` lines with `#` comments; every key
//! can be overridden by the same-named command-line flag (the flag
//! wins). Each resolved value is recorded so report headers can echo the
//! full effective configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use facekit::data::BalanceMode;

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno0, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected 'key = value', got '{raw}'", lineno0 + 1);
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if map.insert(key.clone(), value).is_some() {
            bail!("config line {}: duplicate key '{key}'", lineno0 + 1);
        }
    }
    Ok(map)
}

/// Resolves option values from flag > config file > default, tracking
/// which file keys were consumed and what every option resolved to.
pub struct Resolver {
    file: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
    echoed: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(config_path: Option<&Path>) -> Result<Self> {
        let file = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config file {}", path.display()))?;
                parse_config_text(&text)
                    .with_context(|| format!("in config file {}", path.display()))?
            }
            None => BTreeMap::new(),
        };
        let mut echoed = Vec::new();
        if let Some(path) = config_path {
            echoed.push(("config".to_string(), path.display().to_string()));
        }
        Ok(Resolver {
            file,
            consumed: BTreeSet::new(),
            echoed,
        })
    }

    /// Marks `key` as belonging to this command, whether or not the
    /// file value ends up used (a flag may override it).
    fn file_value<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.file.get(key) {
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key '{key}': cannot parse '{raw}': {e}"),
            },
            None => Ok(None),
        }
    }

    /// Flag > config > default.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.consumed.insert(key.to_string());
        let value = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.echoed.push((key.to_string(), value.to_string()));
        Ok(value)
    }

    /// Flag > config; absent is fine.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.consumed.insert(key.to_string());
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &value {
            self.echoed.push((key.to_string(), v.to_string()));
        }
        Ok(value)
    }

    /// Flag > config; missing is an error naming the key.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.get_opt(key, flag)? {
            Some(v) => Ok(v),
            None => bail!("missing required option '{key}' (flag --{key} or config key)"),
        }
    }

    pub fn require_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.consumed.insert(key.to_string());
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value::<String>(key)?.map(PathBuf::from),
        };
        let Some(path) = value else {
            bail!("missing required option '{key}' (flag --{key} or config key)");
        };
        self.echoed
            .push((key.to_string(), path.display().to_string()));
        Ok(path)
    }

    pub fn get_path(&mut self, key: &str, flag: Option<PathBuf>, default: &str) -> Result<PathBuf> {
        self.consumed.insert(key.to_string());
        let value = match flag {
            Some(v) => v,
            None => self
                .file_value::<String>(key)?
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(default)),
        };
        self.echoed
            .push((key.to_string(), value.display().to_string()));
        Ok(value)
    }

    /// Boolean switch: a bare CLI flag or a true/false config value.
    pub fn get_switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        self.consumed.insert(key.to_string());
        let value = if flag {
            true
        } else {
            self.file_value::<bool>(key)?.unwrap_or(false)
        };
        self.echoed.push((key.to_string(), value.to_string()));
        Ok(value)
    }

    /// Fails on config keys that no option consumed (likely typos) and
    /// returns the resolved pairs for the report header.
    pub fn finish(self) -> Result<Vec<(String, String)>> {
        let unknown: Vec<&String> = self
            .file
            .keys()
            .filter(|k| !self.consumed.contains(*k))
            .collect();
        if !unknown.is_empty() {
            bail!(
                "unknown config key(s): {}",
                unknown
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        Ok(self.echoed)
    }
}

/// `HxW` or a single `N` for square images.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImgSize(pub usize, pub usize);

impl FromStr for ImgSize {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| format!("bad image size '{s}'"))
        };
        match s.split_once(['x', 'X']) {
            Some((h, w)) => Ok(ImgSize(parse(h.trim())?, parse(w.trim())?)),
            None => {
                let n = parse(s.trim())?;
                Ok(ImgSize(n, n))
            }
        }
    }
}

impl Display for ImgSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

/// [`BalanceMode`] with text parsing for flags and config values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Balance(pub BalanceMode);

impl FromStr for Balance {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        BalanceMode::parse(s).map(Balance).map_err(|e| e.to_string())
    }
}

impl Display for Balance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys_with_comments() {
        let map = parse_config_text("# run\nattr = Smiling\nseed=7\n\ntrain-n = 100 # note\n")
            .unwrap();
        assert_eq!(map.get("attr").unwrap(), "Smiling");
        assert_eq!(map.get("seed").unwrap(), "7");
        assert_eq!(map.get("train-n").unwrap(), "100");
    }

    #[test]
    fn rejects_malformed_and_duplicate_lines() {
        assert!(parse_config_text("just words\n").is_err());
        assert!(parse_config_text("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn flag_beats_config_beats_default() {
        let mut r = Resolver {
            file: parse_config_text("seed = 7\n").unwrap(),
            consumed: Default::default(),
            echoed: Vec::new(),
        };
        assert_eq!(r.get("seed", Some(9u64), 42).unwrap(), 9);
        let mut r = Resolver {
            file: parse_config_text("seed = 7\n").unwrap(),
            consumed: Default::default(),
            echoed: Vec::new(),
        };
        assert_eq!(r.get("seed", None, 42u64).unwrap(), 7);
        assert_eq!(r.get("epochs", None, 15usize).unwrap(), 15);
    }

    #[test]
    fn unknown_keys_are_reported() {
        let r = Resolver {
            file: parse_config_text("tpyo = 1\n").unwrap(),
            consumed: Default::default(),
            echoed: Vec::new(),
        };
        let err = r.finish().unwrap_err();
        assert!(err.to_string().contains("tpyo"), "{err}");
    }

    #[test]
    fn img_size_parses_both_forms() {
        assert_eq!("32".parse::<ImgSize>().unwrap(), ImgSize(32, 32));
        assert_eq!("64x48".parse::<ImgSize>().unwrap(), ImgSize(64, 48));
        assert!("axb".parse::<ImgSize>().is_err());
    }
}
