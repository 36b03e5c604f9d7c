//! Flag resolution: every command accepts `--config <json>` whose keys
//! mirror the long flag names; explicit flags override file values, which
//! override built-in defaults. The fully resolved configuration is written
//! to `<out>/config.resolved.json` so any run can be replayed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::CliError;

pub struct Resolver {
    file: Value,
    resolved: BTreeMap<String, Value>,
}

impl Resolver {
    pub fn new(config_path: Option<&Path>) -> Result<Self, CliError> {
        let file = match config_path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::validation(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::validation(format!("bad config JSON: {e}")))?
            }
            None => Value::Null,
        };
        Ok(Resolver { file, resolved: BTreeMap::new() })
    }

    fn file_value(&self, key: &str) -> Option<&Value> {
        self.file.get(key)
    }

    pub fn u64(&mut self, flag: Option<u64>, key: &str, default: u64) -> u64 {
        let v = flag
            .or_else(|| self.file_value(key).and_then(Value::as_u64))
            .unwrap_or(default);
        self.resolved.insert(key.into(), Value::from(v));
        v
    }

    pub fn usize(&mut self, flag: Option<usize>, key: &str, default: usize) -> usize {
        self.u64(flag.map(|v| v as u64), key, default as u64) as usize
    }

    pub fn f64(&mut self, flag: Option<f64>, key: &str, default: f64) -> f64 {
        let v = flag
            .or_else(|| self.file_value(key).and_then(Value::as_f64))
            .unwrap_or(default);
        self.resolved.insert(
            key.into(),
            serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null),
        );
        v
    }

    pub fn string(&mut self, flag: Option<String>, key: &str, default: &str) -> String {
        let v = flag
            .or_else(|| self.file_value(key).and_then(Value::as_str).map(str::to_string))
            .unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.into(), Value::from(v.clone()));
        v
    }

    pub fn opt_string(&mut self, flag: Option<String>, key: &str) -> Option<String> {
        let v = flag.or_else(|| self.file_value(key).and_then(Value::as_str).map(str::to_string));
        if let Some(ref s) = v {
            self.resolved.insert(key.into(), Value::from(s.clone()));
        }
        v
    }

    pub fn path(&mut self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        let v = flag.or_else(|| {
            self.file_value(key)
                .and_then(Value::as_str)
                .map(PathBuf::from)
        });
        match v {
            Some(p) => {
                self.resolved
                    .insert(key.into(), Value::from(p.display().to_string()));
                Ok(p)
            }
            None => Err(CliError::validation(format!("missing required --{key}"))),
        }
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.resolved.insert(key.into(), value);
    }

    /// Writes `config.resolved.json` into the output directory.
    pub fn write_resolved(&self, out_dir: &Path) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(&self.resolved)
            .map_err(|e| CliError::runtime(format!("serialize resolved config: {e}")))?;
        std::fs::write(out_dir.join("config.resolved.json"), body + "\n")
            .map_err(|e| CliError::runtime(format!("write resolved config: {e}")))?;
        Ok(())
    }
}

/// Creates the output directory (parents included).
pub fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out.display())))
}
