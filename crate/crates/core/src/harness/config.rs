//! Experiment configuration (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::synthetic::SyntheticParams;
use crate::corpus::CorpusFormat;
use crate::error::{Error, Result};
use crate::evalx::{DropRule, EvaluatorConfig};
use crate::meta_attack::DetectorConfig;
use crate::models::{LrConfig, ModelSpec};
use crate::saliency::{LimeConfig, SaliencyMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stochastic step derives its own seed from it.
    pub seed: u64,
    /// Runs are written to `<output_dir>/run-<config hash>`.
    pub output_dir: PathBuf,
    pub corpus: CorpusConfig,
    pub model: ModelSpec,
    pub explain: ExplainConfig,
    pub meta_attack: MetaAttackConfig,
    pub evalx: EvalXConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 2022,
            output_dir: PathBuf::from("out"),
            corpus: CorpusConfig::default(),
            model: ModelSpec::Logistic(LrConfig {
                l2: 1e-3,
                epochs: 300,
                learning_rate: 0.02,
            }),
            explain: ExplainConfig::default(),
            meta_attack: MetaAttackConfig::default(),
            evalx: EvalXConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub test_fraction: f64,
    pub source: CorpusSource,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            test_fraction: 0.2,
            source: CorpusSource::Synthetic(SyntheticParams::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSource {
    Synthetic(SyntheticParams),
    File {
        path: PathBuf,
        #[serde(with = "format_name")]
        format: CorpusFormat,
    },
}

mod format_name {
    use super::CorpusFormat;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &CorpusFormat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CorpusFormat, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub methods: Vec<SaliencyMethod>,
    pub fraction: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            methods: vec![
                // LIME needs more samples than tokens; bundled docs run to 304.
                SaliencyMethod::Lime(LimeConfig {
                    n_samples: 400,
                    ..LimeConfig::default()
                }),
                SaliencyMethod::Gradient,
                SaliencyMethod::Occlusion,
                SaliencyMethod::Random,
            ],
            fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Oracle,
    Trained,
}

impl AttackMode {
    pub fn name(self) -> &'static str {
        match self {
            AttackMode::Oracle => "oracle",
            AttackMode::Trained => "trained",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaAttackConfig {
    /// Empty disables the attack.
    pub modes: Vec<AttackMode>,
    pub detector: DetectorConfig,
}

impl Default for MetaAttackConfig {
    fn default() -> Self {
        MetaAttackConfig {
            modes: vec![AttackMode::Oracle, AttackMode::Trained],
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalXConfig {
    pub enabled: bool,
    pub evaluator: EvaluatorConfig,
    /// Seed-varied evaluator approximations available to the query attack,
    /// in addition to the one true evaluator.
    pub approximations: usize,
    pub codebook_alpha: f64,
    /// Explanation lengths swept by both encoding attacks.
    pub k_grid: Vec<usize>,
    pub drop_rule: DropRule,
}

impl Default for EvalXConfig {
    fn default() -> Self {
        EvalXConfig {
            enabled: true,
            evaluator: EvaluatorConfig::default(),
            approximations: 4,
            codebook_alpha: 1.0,
            k_grid: vec![1, 5, 10, 20, 50, 100],
            drop_rule: DropRule::Relative,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.corpus.test_fraction > 0.0 && self.corpus.test_fraction < 1.0) {
            return bad("corpus.test_fraction must lie in (0, 1)".into());
        }
        if !(self.explain.fraction > 0.0 && self.explain.fraction <= 1.0) {
            return bad("explain.fraction must lie in (0, 1]".into());
        }
        let mut names: Vec<&str> = self.explain.methods.iter().map(|m| m.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("explain.methods lists a method twice".into());
        }
        if self.evalx.enabled {
            if self.evalx.k_grid.is_empty() || self.evalx.k_grid.contains(&0) {
                return bad("evalx.k_grid must be non-empty with entries >= 1".into());
            }
            if self.evalx.evaluator.variants == 0 {
                return bad("evalx.evaluator.variants must be >= 1".into());
            }
        }
        Ok(())
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON form, with
    /// `output_dir` excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .take(6)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(format!("run-{}", self.hash()))
    }
}
