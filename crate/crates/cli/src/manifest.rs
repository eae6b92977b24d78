use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mfbo::objectives::ObjectiveSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

/// One file written by a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub kind: String,
    pub schema_version: u32,
}

/// Self-description of a command's output directory. Holds no timestamps so
/// that reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSpec>,
    pub artifacts: Vec<Artifact>,
    #[serde(default)]
    pub details: BTreeMap<String, Value>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, objective: Option<ObjectiveSpec>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            objective,
            artifacts: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn artifact(&mut self, path: impl Into<String>, kind: &str, schema_version: u32) -> &mut Self {
        self.artifacts.push(Artifact {
            path: path.into(),
            kind: kind.into(),
            schema_version,
        });
        self
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("manifest details serialize");
        self.details.insert(key.into(), v);
        self
    }

    /// Writes the config copy (if any) and `manifest.json` into `dir`.
    pub fn write(mut self, dir: &Path, config_text: Option<&str>) -> Result<()> {
        if let Some(text) = config_text {
            fs::write(dir.join(CONFIG_FILE), text)?;
            self.artifact(CONFIG_FILE, "config", 1);
        }
        self.artifact(MANIFEST_FILE, "manifest", MANIFEST_SCHEMA_VERSION);
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }
}
