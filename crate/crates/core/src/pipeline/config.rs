use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::steps::PoolMode;
use crate::aog::{StructConfig, Taxonomy, DEFAULT_K};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::proposal::{default_thresholds, NUM_THRESHOLDS};
use crate::ranking::{SvrConfig, DEFAULT_TOP_N};
use crate::seed::sha256_hex;
use crate::synth::GeneratorConfig;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "POSEPARSE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub generator: GeneratorConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_train: 100,
            n_test: 30,
            generator: GeneratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalConfig {
    pub thresholds: Vec<f64>,
    /// Pool the downstream stages consume.
    pub mode: PoolMode,
    /// Prepend ground-truth part segments to every working pool.
    pub inject_gt: bool,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            thresholds: default_thresholds().to_vec(),
            mode: PoolMode::Guided,
            inject_gt: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerConfig {
    pub svr: SvrConfig,
    pub top_n: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            svr: SvrConfig::default(),
            top_n: DEFAULT_TOP_N,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AogConfig {
    pub learn: StructConfig,
    pub type_specific_pairs: bool,
    /// Beam width `k` when parsing test scenes.
    pub parse_k: usize,
}

impl Default for AogConfig {
    fn default() -> Self {
        AogConfig {
            learn: StructConfig::default(),
            type_specific_pairs: false,
            parse_k: DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Pool modes reported side by side in `compare.json`.
    pub compare: Vec<PoolMode>,
    /// Write parse overlays next to the reports.
    pub overlay: bool,
}

/// Everything a run depends on besides its working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Root of every stage output.
    pub workdir: PathBuf,
    /// Taxonomy JSON; the built-in human taxonomy when absent.
    pub taxonomy: Option<PathBuf>,
    /// AOG model used by `parse` instead of the one `train-aog` writes.
    pub aog_model: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub proposal: ProposalConfig,
    pub features: FeatureConfig,
    pub ranker: RankerConfig,
    pub aog: AogConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 0,
            workdir: PathBuf::from("run"),
            taxonomy: None,
            aog_model: None,
            dataset: DatasetConfig::default(),
            proposal: ProposalConfig::default(),
            features: FeatureConfig::default(),
            ranker: RankerConfig::default(),
            aog: AogConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a config file; parse and schema problems are config errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let c: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if c.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "{}: config schema {} (expected {CONFIG_SCHEMA_VERSION})",
                path.display(),
                c.schema_version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.n_train == 0 || self.dataset.n_test == 0 {
            return Err(Error::Config("n_train and n_test must be positive".into()));
        }
        self.dataset.generator.validate()?;
        if self.proposal.thresholds.len() != NUM_THRESHOLDS {
            return Err(Error::Config(format!("expected {NUM_THRESHOLDS} thresholds")));
        }
        if self.proposal.thresholds.windows(2).any(|p| !(p[0] < p[1])) || self.proposal.thresholds[0] <= 0.0 {
            return Err(Error::Config("thresholds must be positive and strictly increasing".into()));
        }
        let f = &self.features;
        if !(f.lambda > 0.0 && f.lambda.is_finite()) || f.unary_prototypes == 0 || f.pair_prototypes == 0 {
            return Err(Error::Config("lambda and prototype counts must be positive".into()));
        }
        self.ranker.svr.validate()?;
        if self.ranker.top_n == 0 {
            return Err(Error::Config("top_n must be positive".into()));
        }
        self.aog.learn.validate()?;
        if self.aog.parse_k == 0 {
            return Err(Error::Config("parse_k must be positive".into()));
        }
        for p in self.taxonomy.iter().chain(&self.aog_model) {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn load_taxonomy(&self) -> Result<Taxonomy> {
        match &self.taxonomy {
            Some(p) => Taxonomy::load(p),
            None => Ok(Taxonomy::default_human()),
        }
    }

    /// SHA-256 of the config without its working directory, so relocated
    /// runs share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workdir = PathBuf::new();
        sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        c.save(&p).unwrap();
        assert_eq!(PipelineConfig::load(&p).unwrap(), c);
    }

    #[test]
    fn partial_files_take_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 5, "ranker": {"top_n": 3}}"#).unwrap();
        let c = PipelineConfig::load(&p).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.ranker.top_n, 3);
        assert_eq!(c.ranker.svr, SvrConfig::default());
    }

    #[test]
    fn hash_ignores_workdir_only() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.workdir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut c = PipelineConfig::default();
        c.ranker.top_n = 0;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let mut c = PipelineConfig::default();
        c.taxonomy = Some("/nonexistent/taxonomy.json".into());
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, "{ not json").unwrap();
        assert_eq!(PipelineConfig::load(&p).unwrap_err().exit_code(), 2);
    }
}
