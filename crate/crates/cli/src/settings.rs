//! Option resolution: command-line flag, then config file, then default.
//!
//! Config files are flat TOML tables whose keys are the long flag names
//! (`bins = 5000`, `flash-prob = 0.14`, `data = "train.csv"`).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pro_core::io::{fmt17, JsonObject};

use crate::CliError;

/// A resolved option value, kept typed so the manifest can record it faithfully.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Value {
    /// Text form that parses back to the same value.
    pub fn to_text(&self) -> String {
        match self {
            Value::Int(n) => n.to_string(),
            Value::Float(x) => fmt17(*x),
            Value::Bool(b) => b.to_string(),
            Value::Str(s) => s.clone(),
        }
    }
}

/// Option values from a config file, consumed as the command resolves them.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    origin: Option<String>,
    resolved: Vec<(String, Value)>,
}

impl Settings {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_pairs(origin: &str, pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Self { file: pairs.into_iter().collect(), origin: Some(origin.to_string()), resolved: Vec::new() }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config file {}: {e}", path.display())))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e| CliError::Usage(format!("config file {origin}: {e}")))?;
        let mut pairs = Vec::new();
        for (key, value) in table {
            let text = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(n) => n.to_string(),
                toml::Value::Float(x) => fmt17(x),
                toml::Value::Boolean(b) => b.to_string(),
                other => {
                    return Err(CliError::Usage(format!(
                        "config file {origin}: key `{key}` must be a string, number or boolean, got {}",
                        other.type_str()
                    )))
                }
            };
            pairs.push((key, text));
        }
        Ok(Self::from_pairs(origin, pairs))
    }

    /// Optional value: flag, then config file; records the result if present.
    fn lookup<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = self.file.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match from_file {
            None => Ok(None),
            Some(text) => text.trim().parse::<T>().map(Some).map_err(|e| {
                let origin = self.origin.as_deref().unwrap_or("config");
                CliError::Usage(format!("{origin}: invalid value `{text}` for `{key}`: {e}"))
            }),
        }
    }

    fn record(&mut self, key: &str, value: Value) {
        self.resolved.push((key.to_string(), value));
    }

    pub fn u64(&mut self, key: &str, flag: Option<u64>, default: u64) -> Result<u64, CliError> {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.record(key, Value::Int(v));
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, flag: Option<usize>, default: usize) -> Result<usize, CliError> {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.record(key, Value::Int(v as u64));
        Ok(v)
    }

    pub fn f64(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64, CliError> {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.record(key, Value::Float(v));
        Ok(v)
    }

    pub fn bool(&mut self, key: &str, flag: Option<bool>, default: bool) -> Result<bool, CliError> {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.record(key, Value::Bool(v));
        Ok(v)
    }

    pub fn string(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<String, CliError> {
        let v = self.lookup(key, flag)?.unwrap_or_else(|| default.to_string());
        self.record(key, Value::Str(v.clone()));
        Ok(v)
    }

    /// A string with no default; `None` when neither flag nor file sets it.
    pub fn opt_string(&mut self, key: &str, flag: Option<String>) -> Result<Option<String>, CliError> {
        let v = self.lookup(key, flag)?;
        if let Some(s) = &v {
            self.record(key, Value::Str(s.clone()));
        }
        Ok(v)
    }

    pub fn required_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
        let v: PathBuf =
            self.lookup(key, flag)?.ok_or_else(|| CliError::Usage(format!("missing required option --{key}")))?;
        self.record(key, Value::Str(v.display().to_string()));
        Ok(v)
    }

    /// Fails on config keys the command did not consume; returns the resolved options.
    pub fn finish(self) -> Result<Vec<(String, Value)>, CliError> {
        if let Some(key) = self.file.keys().next() {
            let origin = self.origin.as_deref().unwrap_or("config");
            return Err(CliError::Usage(format!("{origin}: unknown key `{key}` for this command")));
        }
        Ok(self.resolved)
    }
}

pub fn values_json(values: &[(String, Value)]) -> JsonObject {
    values.iter().fold(JsonObject::new(), |o, (k, v)| match v {
        Value::Int(n) => o.int(k, *n),
        Value::Float(x) => o.num(k, *x),
        Value::Bool(b) => o.bool(k, *b),
        Value::Str(s) => o.str(k, s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let mut s = Settings::from_toml("bins = 100\nflash-prob = 0.2\n", "cfg").unwrap();
        assert_eq!(s.usize("bins", Some(50), 5000).unwrap(), 50);
        assert_eq!(s.f64("flash-prob", None, 0.14).unwrap(), 0.2);
        assert_eq!(s.u64("seed", None, 1).unwrap(), 1);
        let resolved = s.finish().unwrap();
        assert_eq!(resolved[0], ("bins".to_string(), Value::Int(50)));
        assert_eq!(resolved[1], ("flash-prob".to_string(), Value::Float(0.2)));
        assert_eq!(resolved[2], ("seed".to_string(), Value::Int(1)));
    }

    #[test]
    fn unknown_and_invalid_keys_are_usage_errors() {
        let s = Settings::from_toml("bogus = 1\n", "cfg").unwrap();
        assert!(matches!(s.finish(), Err(CliError::Usage(_))));
        let mut s = Settings::from_toml("bins = \"many\"\n", "cfg").unwrap();
        assert!(matches!(s.usize("bins", None, 1), Err(CliError::Usage(_))));
        assert!(matches!(Settings::from_toml("bins = [1, 2]\n", "cfg"), Err(CliError::Usage(_))));
        assert!(matches!(Settings::from_toml("not toml at all", "cfg"), Err(CliError::Usage(_))));
    }

    #[test]
    fn missing_required_path() {
        let mut s = Settings::empty();
        assert!(matches!(s.required_path("data", None), Err(CliError::Usage(_))));
    }

    #[test]
    fn text_form_round_trips() {
        let x = 0.1 + 0.2;
        let mut s = Settings::from_pairs("m", [("p".to_string(), Value::Float(x).to_text())]);
        assert_eq!(s.f64("p", None, 0.0).unwrap(), x);
    }
}
