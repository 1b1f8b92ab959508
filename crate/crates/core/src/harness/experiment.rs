use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{DataSource, ExperimentConfig, StrategyKind};
use crate::baselines::{afl_round, fedavg_round, qfedavg_round, qfedsgd_round, AflState};
use crate::data::{load_csv, partition, split_validation, ClientProfile, TabularDataset};
use crate::error::{Error, Result};
use crate::fedval::{fedval_round, RankState};
use crate::metrics::summarize;
use crate::model::ModelParams;
use crate::report::{write_csv_rows, RoundReport, CSV_HEADER};
use crate::seed::{derive_seed, round_seed, stream};

/// Receives each round's report as soon as the round completes.
pub trait RoundSink {
    fn record(&mut self, report: &RoundReport<f64>) -> Result<()>;
}

impl RoundSink for Vec<RoundReport<f64>> {
    fn record(&mut self, report: &RoundReport<f64>) -> Result<()> {
        self.push(report.clone());
        Ok(())
    }
}

/// Discards reports.
impl RoundSink for () {
    fn record(&mut self, _: &RoundReport<f64>) -> Result<()> {
        Ok(())
    }
}

/// Appends `rounds.jsonl` and `rounds.csv`, flushing after every round.
struct ArtifactWriter {
    dir: PathBuf,
    jsonl: BufWriter<File>,
    csv: BufWriter<File>,
}

impl ArtifactWriter {
    fn create(dir: &Path) -> Result<Self> {
        let open = |name: &str| {
            let path = dir.join(name);
            File::create(&path)
                .map(BufWriter::new)
                .map_err(|e| Error::io(path, e))
        };
        let mut csv = open("rounds.csv")?;
        writeln!(csv, "{CSV_HEADER}").map_err(|e| Error::io(dir.join("rounds.csv"), e))?;
        Ok(Self {
            dir: dir.to_owned(),
            jsonl: open("rounds.jsonl")?,
            csv,
        })
    }
}

impl RoundSink for ArtifactWriter {
    fn record(&mut self, report: &RoundReport<f64>) -> Result<()> {
        serde_json::to_writer(&mut self.jsonl, report)?;
        let jsonl_path = || self.dir.join("rounds.jsonl");
        writeln!(self.jsonl).map_err(|e| Error::io(jsonl_path(), e))?;
        self.jsonl.flush().map_err(|e| Error::io(jsonl_path(), e))?;
        let csv_path = self.dir.join("rounds.csv");
        write_csv_rows(report, &mut self.csv).map_err(|e| Error::io(&csv_path, e))?;
        self.csv.flush().map_err(|e| Error::io(csv_path, e))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub final_model: ModelParams<f64>,
    pub reports: Vec<RoundReport<f64>>,
}

impl ExperimentOutcome {
    pub fn last(&self) -> &RoundReport<f64> {
        self.reports.last().expect("at least one round")
    }
}

enum StrategyState {
    FedVal(RankState<f64>),
    FedAvg,
    QFedSgd,
    QFedAvg,
    Afl(AflState<f64>),
}

/// A validated config with its data materialized: the validation set and
/// the client shards.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub validation: TabularDataset<f64>,
    pub clients: Vec<ClientProfile<f64>>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let data: TabularDataset<f64> = match &config.data {
            DataSource::Synthetic(spec) => spec.generate()?,
            DataSource::Csv { path, schema } => load_csv(path, schema)?,
        };
        let (train, validation) = split_validation(
            &data,
            config.validation_fraction,
            derive_seed(config.seed, &[stream::VALIDATION]),
        )?;
        let clients = partition(
            &train,
            &config.client_specs(),
            derive_seed(config.seed, &[stream::PARTITION]),
        )?;
        Ok(Self {
            config,
            validation,
            clients,
        })
    }

    /// Runs every round from `w_0 = 0`, handing each report to `sink`.
    pub fn run(&self, sink: &mut dyn RoundSink) -> Result<ExperimentOutcome> {
        let cfg = &self.config;
        let fedval_cfg = cfg.fedval_config();
        let mut state = match cfg.strategy {
            StrategyKind::Fedval => StrategyState::FedVal(RankState::new()),
            StrategyKind::Fedavg => StrategyState::FedAvg,
            StrategyKind::Qfedsgd => StrategyState::QFedSgd,
            StrategyKind::Qfedavg => StrategyState::QFedAvg,
            StrategyKind::Afl => StrategyState::Afl(AflState::uniform(
                self.clients.len(),
                cfg.afl.lambda_learning_rate,
            )),
        };
        let q = cfg.q;
        let mut global = ModelParams::zeros(self.validation.dim());
        let mut reports = Vec::with_capacity(cfg.rounds);
        for round in 1..=cfg.rounds {
            let train = cfg
                .train
                .with_seed(round_seed(cfg.seed, round as u64));
            let mut step = || -> Result<(ModelParams<f64>, RoundReport<f64>)> {
                let (params, mut report) = match &mut state {
                    StrategyState::FedVal(rank) => {
                        let out = fedval_round(&global, &self.clients, &self.validation, &fedval_cfg, &train, rank)?;
                        *rank = out.state;
                        (out.params, out.report)
                    }
                    StrategyState::FedAvg => {
                        let out = fedavg_round(&global, &self.clients, &train)?;
                        (out.params, out.report)
                    }
                    StrategyState::QFedSgd => {
                        let out = qfedsgd_round(&global, &self.clients, q.as_ref().expect("validated"))?;
                        (out.params, out.report)
                    }
                    StrategyState::QFedAvg => {
                        let out = qfedavg_round(&global, &self.clients, q.as_ref().expect("validated"), &train)?;
                        (out.params, out.report)
                    }
                    StrategyState::Afl(afl) => {
                        let (out, next) = afl_round(&global, &self.clients, afl, &train)?;
                        *afl = next;
                        (out.params, out.report)
                    }
                };
                if !params.is_finite() {
                    return Err(Error::InvalidParameter("global model became non-finite".into()));
                }
                if report.global.is_none() {
                    report.global = Some(summarize(&params, &self.validation)?);
                }
                report.round = round;
                Ok((params, report))
            };
            let (params, report) = step().map_err(|e| Error::Round {
                round,
                source: Box::new(e),
            })?;
            sink.record(&report)?;
            reports.push(report);
            global = params;
        }
        Ok(ExperimentOutcome {
            final_model: global,
            reports,
        })
    }
}

/// Prepares and runs `cfg`, writing `resolved_config.json`, `rounds.jsonl`,
/// `rounds.csv` and `final_model.json` into `cfg.out_dir`.
///
/// Reports are flushed per round, so a failing round leaves every completed
/// round on disk.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let dir = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("out_dir is required to write artifacts".into()))?;
    let experiment = Experiment::prepare(cfg.clone())?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))
    };
    write("resolved_config.json", cfg.to_json_pretty()?)?;
    let mut writer = ArtifactWriter::create(&dir)?;
    let outcome = experiment.run(&mut writer)?;
    write("final_model.json", serde_json::to_string_pretty(&outcome.final_model)?)?;
    Ok(outcome)
}
