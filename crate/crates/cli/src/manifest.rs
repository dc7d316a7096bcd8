//! Run manifests: enough to reproduce an artifact with `vstruct replay`.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const TOOL: &str = "vstruct";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub subcommand: String,
    /// Command line after config expansion, without the options that only
    /// choose where output goes or how many workers run.
    pub args: Vec<String>,
    pub parameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub methods: Vec<String>,
    /// Seconds since the Unix epoch; only in the standalone manifest, so
    /// the artifact itself is reproducible byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl RunManifest {
    pub fn stamped(&self) -> RunManifest {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        RunManifest {
            timestamp: Some(now),
            ..self.clone()
        }
    }
}

pub fn sidecar(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// The manifest in a manifest file or in an artifact that embeds one.
pub fn read(path: &Path) -> Result<RunManifest, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| format!("{} is not a JSON manifest or artifact: {e}", path.display()))?;
    let inner = value.get("manifest").cloned().unwrap_or(value);
    let m: RunManifest = serde_json::from_value(inner)
        .map_err(|e| format!("{}: bad manifest: {e}", path.display()))?;
    if m.tool != TOOL {
        return Err(format!(
            "{}: manifest is for {:?}, not {TOOL}",
            path.display(),
            m.tool
        ));
    }
    Ok(m)
}
