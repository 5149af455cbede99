//! Layered settings: command-line flags over the output-directory
//! environment variable over a config file over built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Environment variable overriding the output directory of every command.
pub const OUT_DIR_ENV: &str = "BARKER_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

/// Raw `key -> value` pairs from a config file. Keys are normalised to
/// snake case, so `burn-in` and `burn_in` are the same key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalise(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses either a flat JSON object or `key = value` lines, where blank
    /// lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if text.trim_start().starts_with('{') {
            let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text)
                .map_err(|e| CliError::config("config", format!("invalid JSON: {e}")))?;
            for (k, v) in obj {
                let s = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Null => continue,
                    serde_json::Value::Array(_) | serde_json::Value::Object(_) => {
                        return Err(CliError::config(normalise(&k), "expected a scalar"))
                    }
                    other => other.to_string(),
                };
                values.insert(normalise(&k), s);
            }
        } else {
            for (n, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::config("config", format!("line {}: expected key = value", n + 1))
                })?;
                values.insert(normalise(k), v.trim().trim_matches('"').to_string());
            }
        }
        Ok(ConfigFile { values })
    }
}

/// Resolves settings for one command and rejects config keys it never asked
/// for.
#[derive(Debug)]
pub struct Resolver {
    file: ConfigFile,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self, CliError> {
        let file = match config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Ok(Resolver { file })
    }

    pub fn from_file(file: ConfigFile) -> Self {
        Resolver { file }
    }

    /// The flag if given, else the config file entry, else `None`.
    pub fn optional<T: FromStr>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let from_file = self.file.values.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        from_file
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| CliError::config(key, format!("cannot parse {s:?}: {e}")))
            })
            .transpose()
    }

    pub fn or<T: FromStr>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.optional(key, flag)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| CliError::config(key, "required but not given"))
    }

    /// Output directory: flag, then [`OUT_DIR_ENV`], then the config file,
    /// then [`DEFAULT_OUT_DIR`]. The directory is created if missing.
    pub fn out_dir(&mut self, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
        let env = std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from);
        let dir = self.or("out_dir", flag.or(env), PathBuf::from(DEFAULT_OUT_DIR))?;
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::config("out_dir", format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    /// Fails on the first config file key that no setting consumed.
    pub fn finish(self) -> Result<(), CliError> {
        match self.file.values.into_keys().next() {
            Some(k) => Err(CliError::config(k, "unknown setting for this command")),
            None => Ok(()),
        }
    }
}
