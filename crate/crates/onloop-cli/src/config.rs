//! key=value configuration files and parameter resolution.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Error that maps to exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, anyhow::Error> {
    Err(UsageError(msg.into()).into())
}

/// Values read from a config file. Blank lines and lines starting with `#`
/// are ignored; keys are case-sensitive and use the long flag names.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(UsageError(format!("config line {}: expected key=value", i + 1)));
            };
            let k = k.trim().trim_start_matches("--").replace('_', "-");
            if k.is_empty() {
                return Err(UsageError(format!("config line {}: empty key", i + 1)));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Flag value if given, else config value, else `None`.
pub fn lookup<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>, UsageError>
where
    T::Err: fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    match cfg.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|e| UsageError(format!("config value {key}={raw}: {e}"))),
    }
}

pub fn required<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    lookup(flag, cfg, key)?.ok_or_else(|| UsageError(format!("missing required parameter --{key}")))
}

pub fn with_default<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str, default: T) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    Ok(lookup(flag, cfg, key)?.unwrap_or(default))
}

/// Boolean switches: set by the flag or by `key=true` in the config.
pub fn switch(flag: bool, cfg: &ConfigFile, key: &str) -> Result<bool, UsageError> {
    Ok(flag || lookup::<bool>(None, cfg, key)?.unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let cfg = ConfigFile::parse("# comment\nn = 1\n--kmax=32\nrigid=true\nmax_iter=10\n").unwrap();
        assert_eq!(required::<f64>(None, &cfg, "n").unwrap(), 1.0);
        assert_eq!(required::<f64>(Some(0.5), &cfg, "n").unwrap(), 0.5);
        assert_eq!(with_default::<usize>(None, &cfg, "kmax", 64).unwrap(), 32);
        assert_eq!(with_default::<usize>(None, &cfg, "max-iter", 5).unwrap(), 10);
        assert!(switch(false, &cfg, "rigid").unwrap());
        assert!(required::<f64>(None, &cfg, "g").is_err());
        assert!(ConfigFile::parse("novalue\n").is_err());
        let bad = ConfigFile::parse("n=abc").unwrap();
        assert!(required::<f64>(None, &bad, "n").is_err());
    }
}
