use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{ModelConfig, MultiTaskModel, Parameters};
use crate::error::{Error, Result};
use crate::hierarchy::SenseHierarchy;
use crate::sha256_hex;

const PARAMS_FILE: &str = "params.json";
const CONFIG_FILE: &str = "model_config.json";
const SCHEMA_FILE: &str = "senses.tsv";
const HASHES_FILE: &str = "hashes.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHashes {
    pub hierarchy: String,
    pub run_config: String,
    pub params: String,
}

/// A loaded checkpoint with its hierarchy and recorded hashes.
#[derive(Debug)]
pub struct Checkpoint {
    pub model: MultiTaskModel,
    pub hierarchy: SenseHierarchy,
    pub hashes: CheckpointHashes,
}

/// Writes parameters, model config, the sense schema and the hashes that
/// tie them to the run configuration.
pub fn save_checkpoint(dir: &Path, model: &MultiTaskModel, hierarchy: &SenseHierarchy, run_config_hash: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let params = serde_json::to_string(model.parameters())?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    write(PARAMS_FILE, &params)?;
    write(CONFIG_FILE, &serde_json::to_string_pretty(model.config())?)?;
    write(SCHEMA_FILE, &hierarchy.to_schema())?;
    let hashes = CheckpointHashes {
        hierarchy: hierarchy.schema_hash(),
        run_config: run_config_hash.to_string(),
        params: sha256_hex(params.as_bytes()),
    };
    write(HASHES_FILE, &serde_json::to_string_pretty(&hashes)?)
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| Error::io(path, e))
}

fn verify(what: &str, expected: &str, found: &str) -> Result<()> {
    if expected != found {
        return Err(Error::HashMismatch {
            what: what.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Loads a checkpoint and recomputes the hierarchy and parameter hashes.
pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let hashes: CheckpointHashes = serde_json::from_str(&read(dir, HASHES_FILE)?)?;
    let hierarchy = SenseHierarchy::from_schema(&read(dir, SCHEMA_FILE)?)?;
    verify("sense hierarchy", &hashes.hierarchy, &hierarchy.schema_hash())?;
    let params_text = read(dir, PARAMS_FILE)?;
    verify("parameters", &hashes.params, &sha256_hex(params_text.as_bytes()))?;
    let params: Parameters = serde_json::from_str(&params_text)?;
    let config: ModelConfig = serde_json::from_str(&read(dir, CONFIG_FILE)?)?;
    let model = MultiTaskModel::from_parts(config, &hierarchy, params)?;
    Ok(Checkpoint {
        model,
        hierarchy,
        hashes,
    })
}

impl Checkpoint {
    /// Refuses evaluation against data prepared under a different hierarchy.
    pub fn check_hierarchy(&self, hierarchy: &SenseHierarchy) -> Result<()> {
        verify("sense hierarchy", &self.hashes.hierarchy, &hierarchy.schema_hash())
    }

    pub fn check_run_config(&self, run_config_hash: &str) -> Result<()> {
        verify("run config", &self.hashes.run_config, run_config_hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tamper_detection() {
        let h = SenseHierarchy::canonical();
        let model = MultiTaskModel::new(ModelConfig::default(), &h).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &model, &h, "abc").unwrap();
        let ck = load_checkpoint(dir.path()).unwrap();
        assert_eq!(ck.model.parameters(), model.parameters());
        ck.check_hierarchy(&h).unwrap();
        ck.check_run_config("abc").unwrap();
        assert!(ck.check_run_config("abd").is_err());
        let reduced = SenseHierarchy::with_level3(&[]).unwrap();
        assert!(matches!(ck.check_hierarchy(&reduced), Err(Error::HashMismatch { .. })));

        let path = dir.path().join(PARAMS_FILE);
        let text = std::fs::read_to_string(&path).unwrap().replacen('1', "2", 1);
        std::fs::write(&path, text).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::HashMismatch { .. })));
    }
}
