use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{CsvOptions, MissingnessSpec};
use crate::forest::TrainConfig;
use crate::mip::ModelConfig;
use crate::theory::SuiteOptions;

/// Data options with defaults matching the bundled CSV (`label`, `group`, `NA`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub label_col: String,
    pub group_col: String,
    pub na_token: String,
    pub delimiter: char,
    pub encoding: crate::dataset::Encoding,
}

impl Default for DataConfig {
    fn default() -> Self {
        let o = CsvOptions::new("label", "group");
        DataConfig {
            label_col: o.label_col,
            group_col: o.group_col,
            na_token: o.na_token,
            delimiter: o.delimiter,
            encoding: o.encoding,
        }
    }
}

impl DataConfig {
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            label_col: self.label_col.clone(),
            group_col: self.group_col.clone(),
            na_token: self.na_token.clone(),
            delimiter: self.delimiter,
            encoding: self.encoding.clone(),
        }
    }
}

/// Options of the exported program that are not part of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MipConfig {
    pub big_m: Option<f64>,
    pub eps_tol: f64,
}

impl Default for MipConfig {
    fn default() -> Self {
        let m = ModelConfig::new(1, 0.0, crate::FairnessMetric::FnrDiff);
        MipConfig { big_m: m.big_m, eps_tol: m.eps_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub repetitions: usize,
    pub test_fraction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { lambdas: vec![0.0, 0.5, 1.0, 2.0], repetitions: 10, test_fraction: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryConfig {
    pub monte_carlo_samples: usize,
    pub random_joints: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        let s = SuiteOptions::default();
        TheoryConfig { monte_carlo_samples: s.monte_carlo_samples, random_joints: s.random_joints }
    }
}

/// Everything a command needs besides its input files. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub missingness: MissingnessSpec,
    pub train: TrainConfig,
    pub mip: MipConfig,
    pub sweep: SweepConfig,
    pub theory: TheoryConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.train.validate().map_err(|e| e.to_string())?;
        self.missingness.validate().map_err(|e| e.to_string())?;
        self.model_config().validate().map_err(|e| e.to_string())?;
        // the counting floor n + 1 depends on the batch and is checked when building
        if self.mip.big_m.is_some_and(|m| !(m >= crate::mip::SPLIT_BIG_M)) {
            return Err(format!("mip.big_m must be at least {}", crate::mip::SPLIT_BIG_M));
        }
        if self.sweep.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err("sweep.lambdas must be finite and >= 0".into());
        }
        if self.sweep.repetitions == 0 {
            return Err("sweep.repetitions must be at least 1".into());
        }
        if !(self.sweep.test_fraction > 0.0 && self.sweep.test_fraction < 1.0) {
            return Err("sweep.test_fraction must lie in (0, 1)".into());
        }
        if self.data.label_col == self.data.group_col {
            return Err("data.label_col and data.group_col must differ".into());
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { big_m: self.mip.big_m, eps_tol: self.mip.eps_tol, ..self.train.model_config() }
    }

    pub fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            seed: self.seed,
            monte_carlo_samples: self.theory.monte_carlo_samples,
            random_joints: self.theory.random_joints,
        }
    }
}

/// Hex SHA-256 of the compact JSON serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("configs serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.train.n_tree, 30);
        assert_eq!(cfg.data.na_token, "NA");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"trian": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"lamda": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"sweep": {"lambdas": [0, -1]}}"#).is_err());
    }

    #[test]
    fn round_trip_and_hash() {
        let text = r#"{"seed": 3, "train": {"lambda": 0.5, "metric": "fpr_diff"},
            "missingness": {"entries": [{"feature": "sex", "p0": 0.6, "p1": 0.2}]}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(config_hash(&cfg), config_hash(&back));
        assert_ne!(config_hash(&cfg), config_hash(&RunConfig::default()));
        assert_eq!(config_hash(&cfg).len(), 64);
    }
}
