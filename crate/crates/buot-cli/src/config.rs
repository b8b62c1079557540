//! Simple `key=value` configuration files and the flag > config > default
//! precedence rule.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut entries = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { entries })
    }

    /// Flag value if given, else the config entry, else the default.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.entries.get(key) {
            Some(raw) => raw.parse().map_err(|e| {
                CliError::Validation(format!("config key {key}={raw:?}: {e}"))
            }),
            None => Ok(default),
        }
    }

    /// Like [`resolve`](Self::resolve) but without a default.
    pub fn resolve_opt<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Validation(format!("config key {key}={raw:?}: {e}"))),
            None => Ok(None),
        }
    }
}
