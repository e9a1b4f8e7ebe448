//! Run manifests: enough to reproduce an output directory exactly.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use pro_core::io::JsonObject;
use serde_json::Value as Json;
use sha2::{Digest, Sha256};

use crate::settings::{values_json, Value};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct InputDigest {
    /// Option that named the file.
    pub key: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Vec<(String, Value)>,
    pub base_seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub created_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_unix() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let inputs: Vec<String> = self
            .inputs
            .iter()
            .map(|i| JsonObject::new().str("key", &i.key).str("path", &i.path).str("sha256", &i.sha256).to_inline())
            .collect();
        JsonObject::new()
            .str("command", &self.command)
            .str("version", &self.version)
            .obj("config", values_json(&self.config))
            .raw("base_seed", self.base_seed.map_or_else(|| "null".into(), |s| s.to_string()))
            .raw("inputs", format!("[{}]", inputs.join(", ")))
            .strs("outputs", &self.outputs)
            .int("created_unix", self.created_unix)
            .to_pretty()
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read manifest {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|m| CliError::Input(format!("manifest {}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let doc: Json = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let str_field =
            |v: &Json, k: &str| v.get(k).and_then(Json::as_str).map(str::to_string).ok_or(format!("missing `{k}`"));
        let config = doc
            .get("config")
            .and_then(Json::as_object)
            .ok_or("missing `config` object")?
            .iter()
            .map(|(k, v)| {
                let value = match v {
                    Json::Bool(b) => Value::Bool(*b),
                    Json::String(s) => Value::Str(s.clone()),
                    Json::Number(n) => match n.as_u64() {
                        Some(i) => Value::Int(i),
                        None => Value::Float(n.as_f64().ok_or(format!("`{k}` is not a number"))?),
                    },
                    Json::Null => Value::Float(f64::NAN),
                    _ => return Err(format!("config value `{k}` has an unsupported type")),
                };
                Ok((k.clone(), value))
            })
            .collect::<Result<Vec<_>, String>>()?;
        let inputs = doc
            .get("inputs")
            .and_then(Json::as_array)
            .ok_or("missing `inputs` array")?
            .iter()
            .map(|i| {
                Ok(InputDigest {
                    key: str_field(i, "key")?,
                    path: str_field(i, "path")?,
                    sha256: str_field(i, "sha256")?,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let outputs = doc
            .get("outputs")
            .and_then(Json::as_array)
            .ok_or("missing `outputs` array")?
            .iter()
            .map(|o| o.as_str().map(str::to_string).ok_or("`outputs` must hold strings".to_string()))
            .collect::<Result<Vec<_>, String>>()?;
        Ok(Self {
            command: str_field(&doc, "command")?,
            version: str_field(&doc, "version")?,
            config,
            base_seed: doc.get("base_seed").and_then(Json::as_u64),
            inputs,
            outputs,
            created_unix: doc.get("created_unix").and_then(Json::as_u64).unwrap_or(0),
        })
    }
}
