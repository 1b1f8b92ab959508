use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::QConfig;
use crate::data::{Behavior, ClientSpec, DatasetSchema, SkewSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::fedval::{FedValConfig, RankingConfig};
use crate::metrics::{ObjectiveSpec, ScoreTransform};
use crate::model::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv { path: PathBuf, schema: DatasetSchema },
}

/// `count` clients sharing a behavior and an optional skew.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientGroup {
    pub behavior: Behavior,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew: Option<SkewSpec>,
}

impl ClientGroup {
    pub fn new(behavior: Behavior, count: usize, skew: Option<SkewSpec>) -> Self {
        Self { behavior, count, skew }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Fedval,
    Fedavg,
    Qfedsgd,
    Qfedavg,
    Afl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default = "one")]
    pub local_epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
}

fn default_batch() -> usize {
    32
}

fn default_lr() -> f64 {
    0.1
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            local_epochs: 1,
            batch_size: default_batch(),
            learning_rate: default_lr(),
        }
    }
}

impl TrainSettings {
    pub fn with_seed(&self, seed: u64) -> TrainConfig<f64> {
        TrainConfig::new(self.local_epochs, self.batch_size, self.learning_rate, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AflSettings {
    #[serde(default = "default_lambda_lr")]
    pub lambda_learning_rate: f64,
}

fn default_lambda_lr() -> f64 {
    0.1
}

impl Default for AflSettings {
    fn default() -> Self {
        Self {
            lambda_learning_rate: default_lambda_lr(),
        }
    }
}

fn default_validation_fraction() -> f64 {
    0.2
}

fn default_objectives() -> ObjectiveSpec<f64> {
    ObjectiveSpec::all_unit()
}

fn default_ranking() -> RankingConfig<f64> {
    RankingConfig {
        enabled: false,
        initial_step: 2.0,
        step_size: 1.5,
    }
}

fn default_blend() -> f64 {
    0.5
}

/// A complete, self-describing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub data: DataSource,
    pub clients: Vec<ClientGroup>,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    pub strategy: StrategyKind,
    #[serde(default = "default_objectives")]
    pub objectives: ObjectiveSpec<f64>,
    #[serde(default)]
    pub score_transform: ScoreTransform,
    #[serde(default = "default_blend")]
    pub blend: f64,
    #[serde(default = "default_ranking")]
    pub ranking: RankingConfig<f64>,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<QConfig<f64>>,
    #[serde(default)]
    pub afl: AflSettings,
    pub rounds: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config file; a relative CSV path is taken relative to the
    /// file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base_dir: &Path) {
        if let DataSource::Csv { path, .. } = &mut self.data {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn client_count(&self) -> usize {
        self.clients.iter().map(|g| g.count).sum()
    }

    /// One entry per client, in id order.
    pub fn client_specs(&self) -> Vec<ClientSpec> {
        self.clients
            .iter()
            .flat_map(|g| {
                std::iter::repeat_n(
                    ClientSpec {
                        behavior: g.behavior,
                        skew: g.skew,
                    },
                    g.count,
                )
            })
            .collect()
    }

    pub fn fedval_config(&self) -> FedValConfig<f64> {
        FedValConfig {
            objectives: self.objectives.clone(),
            blend: self.blend,
            transform: self.score_transform,
            ranking: self.ranking,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Error::Config(m);
        if self.rounds == 0 {
            return Err(cfg_err("rounds must be >= 1".into()));
        }
        if self.client_count() == 0 {
            return Err(cfg_err("at least one client is required".into()));
        }
        for g in &self.clients {
            if let Some(s) = &g.skew {
                s.validate().map_err(|e| cfg_err(e.to_string()))?;
            }
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(cfg_err(format!(
                "validation_fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        self.train
            .with_seed(0)
            .validate()
            .map_err(|e| cfg_err(e.to_string()))?;
        match &self.data {
            DataSource::Synthetic(s) => {
                if s.n < 2 || s.dim == 0 {
                    return Err(cfg_err("synthetic data needs n >= 2 and dim >= 1".into()));
                }
            }
            DataSource::Csv { path, schema } => {
                schema.validate()?;
                if !path.is_file() {
                    return Err(cfg_err(format!("data file {} does not exist", path.display())));
                }
            }
        }
        match self.strategy {
            StrategyKind::Fedval => {
                self.fedval_config().validate().map_err(|e| cfg_err(e.to_string()))?;
            }
            StrategyKind::Qfedsgd | StrategyKind::Qfedavg => {
                let q = self
                    .q
                    .ok_or_else(|| cfg_err("q strategies need a `q` section".into()))?;
                q.validate().map_err(|e| cfg_err(e.to_string()))?;
            }
            StrategyKind::Afl => {
                if !(self.afl.lambda_learning_rate > 0.0 && self.afl.lambda_learning_rate.is_finite()) {
                    return Err(cfg_err("afl.lambda_learning_rate must be > 0".into()));
                }
            }
            StrategyKind::Fedavg => {}
        }
        Ok(())
    }

    /// Non-fatal concerns worth printing before a run.
    pub fn warnings(&self) -> Vec<String> {
        if self.strategy == StrategyKind::Fedval {
            self.ranking.warnings()
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "data": {"kind": "synthetic", "n": 200, "dim": 3, "group_positive_rates": [0.5, 0.5], "seed": 1},
        "clients": [{"behavior": "cooperative", "count": 3},
                    {"behavior": "uncooperative", "skew": {"ratio": 0.2}}],
        "strategy": "fedval",
        "rounds": 2,
        "seed": 9
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.client_count(), 4);
        assert_eq!(cfg.train, TrainSettings::default());
        assert_eq!(cfg.validation_fraction, 0.2);
        assert_eq!(cfg.objectives.entries().len(), 3);
        assert!(!cfg.ranking.enabled);
        let specs = cfg.client_specs();
        assert_eq!(specs[3].skew.unwrap().ratio, 0.2);
        // The resolved form parses back to the same value.
        let again = ExperimentConfig::from_json(&cfg.to_json_pretty().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn validation_catches_missing_sections() {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.strategy = StrategyKind::Qfedavg;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.strategy = StrategyKind::Fedavg;
        cfg.rounds = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.data = DataSource::Csv {
            path: "/definitely/not/here.csv".into(),
            schema: DatasetSchema::synthetic(3),
        };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("\"rounds\"", "\"roundz\"")).is_err());
    }
}
