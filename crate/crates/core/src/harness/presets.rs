//! Named hyperparameter presets for the Adult and Health experiment tables.
//!
//! Every preset runs on a desk-scale synthetic stand-in (n = 4000, dim = 8,
//! equal group base rates); swap `data` for a CSV source to run the real
//! dataset. Client mixes are 40% cooperative, 30% normal and 30%
//! uncooperative with disadvantaged positives skewed to 0.2 of the
//! advantaged rate.

use super::config::{AflSettings, ClientGroup, DataSource, ExperimentConfig, StrategyKind, TrainSettings};
use crate::baselines::QConfig;
use crate::data::{Behavior, SkewSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::fedval::RankingConfig;
use crate::metrics::{ObjectiveSpec, ScoreTransform};

const NAMES: [&str; 9] = [
    "adult-fedval-10",
    "health-fedval-10",
    "adult-qfed",
    "health-qfed",
    "adult-afl",
    "health-afl",
    "adult-fedavg",
    "health-fedavg",
    "fedval-100",
];

pub fn preset_names() -> Vec<String> {
    NAMES.iter().map(|s| (*s).to_owned()).collect()
}

fn clients(k: usize) -> Vec<ClientGroup> {
    let cooperative = k * 4 / 10;
    let normal = k * 3 / 10;
    vec![
        ClientGroup::new(Behavior::Cooperative, cooperative, None),
        ClientGroup::new(Behavior::Normal, normal, None),
        ClientGroup::new(Behavior::Uncooperative, k - cooperative - normal, Some(SkewSpec::new(0.2))),
    ]
}

fn base(name: &str, strategy: StrategyKind, rounds: usize, learning_rate: f64, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.to_owned()),
        notes: None,
        data: DataSource::Synthetic(SyntheticSpec {
            n: 4000,
            dim: 8,
            group_positive_rates: (0.5, 0.5),
            seed: 2022,
        }),
        clients: clients(k),
        validation_fraction: 0.2,
        strategy,
        objectives: ObjectiveSpec::all_unit(),
        score_transform: ScoreTransform::Complement,
        blend: 0.5,
        ranking: RankingConfig {
            enabled: false,
            initial_step: 2.0,
            step_size: 1.5,
        },
        train: TrainSettings {
            local_epochs: 1,
            batch_size: 32,
            learning_rate,
        },
        q: None,
        afl: AflSettings::default(),
        rounds,
        seed: 0,
        out_dir: None,
    }
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let fedval = |rounds, lr, mu, rho, k| {
        let mut cfg = base(name, StrategyKind::Fedval, rounds, lr, k);
        cfg.ranking = RankingConfig::new(mu, rho);
        cfg
    };
    let qfed = |rounds| {
        let mut cfg = base(name, StrategyKind::Qfedavg, rounds, 0.01, 10);
        cfg.q = Some(QConfig::new(5.0, 1.0, 0.01));
        cfg.notes = Some("same row applies to q-FedSGD: set strategy to \"qfedsgd\"".into());
        cfg
    };
    let afl = |rounds| {
        let mut cfg = base(name, StrategyKind::Afl, rounds, 0.01, 10);
        cfg.notes = Some(
            "the source table lists q = 0 for AFL; this preset runs the minimax procedure, \
             q-FFL with q = 0 is the qfedavg strategy with q.q = 0"
                .into(),
        );
        cfg
    };
    let cfg = match name {
        "adult-fedval-10" => fedval(150, 0.1, 2.0, 1.5, 10),
        "health-fedval-10" => fedval(350, 0.1, 0.001, 10.0, 10),
        "fedval-100" => fedval(150, 0.1, 2.0, 1.5, 100),
        "adult-qfed" => qfed(1000),
        "health-qfed" => qfed(3000),
        "adult-afl" => afl(1000),
        "health-afl" => afl(3000),
        "adult-fedavg" => base(name, StrategyKind::Fedavg, 150, 0.1, 10),
        "health-fedavg" => base(name, StrategyKind::Fedavg, 350, 0.1, 10),
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_owned(),
                available: preset_names(),
            })
        }
    };
    Ok(cfg)
}
