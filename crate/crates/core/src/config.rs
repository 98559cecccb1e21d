//! Experiment configuration: a TOML document whose dotted key paths
//! (`train.lr`, `model.dim`, ...) can be overridden from the command line.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::closure::ClosureConfig;
use crate::geometry::{Activation, ModelConfig, RegMode, DEFAULT_LEAKY_SLOPE};
use crate::training::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Invalid(String),
    #[error("bad override {0:?}: expected key=value")]
    Override(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    LeakyRelu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub dim: usize,
    pub margin: f64,
    pub reg_mode: RegMode,
    pub reg_radius: f64,
    pub activation: ActivationKind,
    pub leaky_slope: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            dim: 50,
            margin: 0.1,
            reg_mode: RegMode::Strict,
            reg_radius: 1.0,
            activation: ActivationKind::Relu,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            margin: self.margin,
            reg_mode: self.reg_mode,
            reg_radius: self.reg_radius,
            activation: match self.activation {
                ActivationKind::Relu => Activation::Relu,
                ActivationKind::LeakyRelu => Activation::LeakyRelu {
                    slope: self.leaky_slope,
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub filter_with_closure: bool,
    pub entailed_ratio: f64,
    pub max_resample_attempts: u32,
    /// Named pool of corruption candidates; all named classes when absent.
    pub pool: Option<String>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            filter_with_closure: false,
            entailed_ratio: 0.0,
            max_resample_attempts: crate::sampling::DEFAULT_MAX_ATTEMPTS,
            pool: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieMode {
    #[default]
    Optimistic,
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Named pool of candidate tails; all named classes when absent.
    pub pool: Option<String>,
    pub tie_mode: TieMode,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            pool: None,
            tie_mode: TieMode::Optimistic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub margin: Vec<f64>,
    pub dim: Vec<usize>,
    pub reg_radius: Vec<f64>,
    pub lr: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            margin: vec![-0.1, -0.01, 0.0, 0.01, 0.1],
            dim: vec![50, 100, 200, 400],
            reg_radius: vec![1.0, 2.0],
            lr: vec![0.01, 0.001, 0.0001],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub train: TrainConfig,
    pub sampler: SamplerSection,
    pub closure: ClosureConfig,
    pub eval: EvalSection,
    pub grid: GridSection,
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|p| !p.is_empty()).ok_or_else(|| ConfigError::Override(key.into()))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("{key}: {p} is not a table")))?;
    }
    cur.insert(last.to_owned(), value);
    Ok(())
}

/// Deserialize a TOML document after applying `key=value` overrides to it.
/// Unknown keys are rejected by the target type's schema.
pub fn overlay<T: serde::de::DeserializeOwned>(text: &str, overrides: &[String]) -> Result<T, ConfigError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
        set_path(&mut table, k.trim(), parse_value(v.trim()))?;
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string().trim().to_owned()))
}

impl ExperimentConfig {
    /// Parse a TOML document and apply `key=value` overrides on top of it.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = overlay(text, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Self::from_toml_with(text, &[])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        let t = &self.train;
        if self.model.dim == 0 {
            return bad("model.dim must be positive");
        }
        if t.batch_size == 0 {
            return bad("train.batch_size must be positive");
        }
        if t.plateau_patience == 0 || t.early_stop_patience == 0 {
            return bad("patience values must be positive");
        }
        if !(t.lr.is_finite() && t.lr >= 0.0) {
            return bad("train.lr must be a finite non-negative number");
        }
        if !(0.0..=1.0).contains(&self.sampler.entailed_ratio) {
            return bad("sampler.entailed_ratio must lie in [0, 1]");
        }
        if self.sampler.max_resample_attempts == 0 {
            return bad("sampler.max_resample_attempts must be positive");
        }
        let g = &self.grid;
        if g.margin.is_empty() || g.dim.is_empty() || g.reg_radius.is_empty() || g.lr.is_empty() {
            return bad("grid lists must be non-empty");
        }
        Ok(())
    }

    /// Every key with its resolved value.
    pub fn resolved(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the resolved config with keys in sorted order.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&self.resolved()).expect("json");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to toml")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::WeightingMode;

    #[test]
    fn defaults_and_sections() {
        let cfg = ExperimentConfig::from_toml("[train]\nlr = 0.01\n[model]\ndim = 10\n").unwrap();
        assert_eq!(cfg.train.lr, 0.01);
        assert_eq!(cfg.model.dim, 10);
        assert_eq!(cfg.train.epochs, 400);
        assert_eq!(cfg.train.batch_size, 32_768);
        assert_eq!(cfg.train.seed, 42);
        assert_eq!(cfg.train.weighting, WeightingMode::InverseFrequency);
        assert_eq!(cfg.closure.budget, 100_000_000);
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let text = "train.lr = 0.5\nmodel.activation = \"leaky_relu\"\n";
        let over = vec!["train.lr=0.001".to_string(), "sampler.pool=proteins".to_string()];
        let cfg = ExperimentConfig::from_toml_with(text, &over).unwrap();
        assert_eq!(cfg.train.lr, 0.001);
        assert_eq!(cfg.model.activation, ActivationKind::LeakyRelu);
        assert_eq!(cfg.sampler.pool.as_deref(), Some("proteins"));
        let cfg = ExperimentConfig::from_toml_with("", &["grid.dim=[10, 20]".into()]).unwrap();
        assert_eq!(cfg.grid.dim, vec![10, 20]);
    }

    #[test]
    fn typos_are_rejected() {
        let err = ExperimentConfig::from_toml("[train]\nlearning_rate = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
        let err = ExperimentConfig::from_toml_with("", &["trian.lr=1".into()]).unwrap_err();
        assert!(err.to_string().contains("trian"), "{err}");
        assert!(ExperimentConfig::from_toml_with("", &["nonsense".into()]).is_err());
        assert!(ExperimentConfig::from_toml("[train]\nearly_stop_patience = 0\n").is_err());
    }

    #[test]
    fn digest_ignores_key_order() {
        let a = ExperimentConfig::from_toml("[train]\nlr = 0.01\nseed = 7\n[model]\ndim = 8\n").unwrap();
        let b = ExperimentConfig::from_toml("[model]\ndim = 8\n[train]\nseed = 7\nlr = 0.01\n").unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = ExperimentConfig::from_toml("[train]\nseed = 8\n").unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::from_toml_with("", &["eval.pool=tails".into(), "model.reg_mode=relaxed".into()]).unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn default_grid_has_120_points() {
        let g = GridSection::default();
        assert_eq!(g.margin.len() * g.dim.len() * g.reg_radius.len() * g.lr.len(), 120);
    }
}
