//! key=value config file support.
//!
//! Lines are `key=value`; blank lines and `#` comments are ignored. Flags
//! beat config values, config values beat built-in defaults.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::CmdError;

#[derive(Debug, Default)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    /// Loads a config file; no path means an empty config.
    pub fn load(path: Option<&Path>) -> Result<Self, CmdError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CmdError::input(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    i + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Typed lookup; a present but unparsable value is an input error.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CmdError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CmdError::input(format!("config key {key} has invalid value {raw:?}"))
            }),
        }
    }

    /// Flag value, else config value, else default.
    pub fn resolve<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CmdError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Flag value, else config value, else `None`.
    pub fn resolve_opt<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CmdError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}
