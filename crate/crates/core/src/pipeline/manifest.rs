use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::seed::sha256_hex;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// A file relative to the run directory and its SHA-256.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(root: &Path, rel: &str) -> Result<Self> {
        let path = root.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(FileDigest {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Completion record of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub stage: String,
    pub stage_version: u32,
    /// Hash of the whole config.
    pub config_hash: String,
    /// Hash of the config sections this stage and its upstream read.
    pub stage_hash: String,
    pub seed: u64,
    pub elapsed_ms: u64,
    /// Upstream manifests, digested by their `outputs_digest`.
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// SHA-256 over the output list.
    pub outputs_digest: String,
}

pub fn outputs_digest(outputs: &[FileDigest]) -> String {
    let mut text = String::new();
    for o in outputs {
        text.push_str(&o.path);
        text.push('\t');
        text.push_str(&o.sha256);
        text.push('\n');
    }
    sha256_hex(text.as_bytes())
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let m: RunManifest = io::read_json(path)?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: MANIFEST_SCHEMA_VERSION,
                found: m.schema_version,
            });
        }
        Ok(m)
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save_atomic(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        io::write_json(&tmp, self)?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Every recorded output still exists with its recorded digest.
    pub fn outputs_intact(&self, root: &Path) -> bool {
        self.outputs
            .iter()
            .all(|o| FileDigest::of(root, &o.path).is_ok_and(|d| d.sha256 == o.sha256))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_save_and_integrity_check() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "alpha").unwrap();
        let outputs = vec![FileDigest::of(dir.path(), "a.txt").unwrap()];
        let m = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            stage: "synth".into(),
            stage_version: 1,
            config_hash: "c".into(),
            stage_hash: "s".into(),
            seed: 3,
            elapsed_ms: 10,
            inputs: vec![],
            outputs_digest: outputs_digest(&outputs),
            outputs,
        };
        let p = dir.path().join("m.json");
        m.save_atomic(&p).unwrap();
        assert!(!dir.path().join("m.json.tmp").exists());
        let back = RunManifest::load(&p).unwrap();
        assert_eq!(back, m);
        assert!(back.outputs_intact(dir.path()));
        fs::write(dir.path().join("a.txt"), "beta").unwrap();
        assert!(!back.outputs_intact(dir.path()));
    }
}
