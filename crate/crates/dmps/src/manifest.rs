use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{parse_entries, RunConfig};
use crate::error::{DmpsError, DmpsResult};

/// `v<crate version>` followed by `git describe` output when available.
pub fn version_string() -> String {
    let describe = env!("DMPS_GIT_DESCRIBE");
    if describe.is_empty() {
        format!("v{}", env!("CARGO_PKG_VERSION"))
    } else {
        format!("v{}-{describe}", env!("CARGO_PKG_VERSION"))
    }
}

/// Everything needed to re-run a training invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: Option<String>,
    /// Resolved `key = value` config with every default written out.
    pub config_snapshot: String,
    pub seeds: Vec<u64>,
    pub out_dir: String,
    pub version: String,
}

impl RunManifest {
    pub fn new(config: &RunConfig, config_path: Option<&Path>, out_dir: &Path) -> Self {
        Self {
            config_path: config_path.map(|p| p.display().to_string()),
            config_snapshot: config.snapshot(),
            seeds: config.train.seeds.clone(),
            out_dir: out_dir.display().to_string(),
            version: version_string(),
        }
    }

    /// The run config with the manifest's seeds.
    pub fn config(&self) -> DmpsResult<RunConfig> {
        let mut cfg = RunConfig::parse(&self.config_snapshot)?;
        cfg.train.seeds = self.seeds.clone();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> DmpsResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        fs::write(path, text).map_err(|e| DmpsError::io(path, e))
    }

    pub fn load(path: &Path) -> DmpsResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| DmpsError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DmpsError::Config(format!("{}: {e}", path.display())))
    }
}

/// Config entries from either a `key = value` file or a manifest, whose
/// seed list becomes `train.seeds`.
pub fn load_entries(path: &Path) -> DmpsResult<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| DmpsError::io(path, e))?;
    if text.trim_start().starts_with('{') {
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| DmpsError::Config(format!("{}: {e}", path.display())))?;
        let mut entries = parse_entries(&m.config_snapshot)?;
        let seeds: Vec<String> = m.seeds.iter().map(u64::to_string).collect();
        entries.insert("train.seeds".into(), seeds.join(","));
        Ok(entries)
    } else {
        parse_entries(&text)
    }
}

pub fn load_config(path: &Path) -> DmpsResult<RunConfig> {
    RunConfig::from_entries(load_entries(path)?)
}
