//! Cooperative-ratio sweeps: the same experiment re-run with a varying
//! number of cooperative clients, per variant and replicate seed.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ClientGroup, ExperimentConfig};
use super::experiment::{run_experiment, Experiment, ExperimentOutcome};
use crate::data::{Behavior, SkewSpec};
use crate::error::{Error, Result};
use crate::metrics::MetricSummary;

/// Rounds averaged for the per-behavior weight columns.
pub const TAIL_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepVariant {
    pub name: String,
    pub ranking: bool,
}

fn default_variants() -> Vec<SweepVariant> {
    vec![
        SweepVariant {
            name: "ranking".into(),
            ranking: true,
        },
        SweepVariant {
            name: "no-ranking".into(),
            ranking: false,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Numbers of cooperative clients out of the base config's total.
    pub cooperative_counts: Vec<usize>,
    #[serde(default = "default_variants")]
    pub variants: Vec<SweepVariant>,
    /// One run per seed in every cell; each seed replaces the master seed.
    pub replicate_seeds: Vec<u64>,
    /// Skew of the non-cooperative clients; defaults to the first skew
    /// found in the base config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncooperative_skew: Option<SkewSpec>,
}

/// Base experiment of a sweep file: inline, or a path relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseConfig {
    Path(PathBuf),
    Inline(Box<ExperimentConfig>),
}

/// On-disk sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub base: BaseConfig,
    #[serde(flatten)]
    pub spec: SweepSpec,
}

impl SweepFile {
    pub fn from_file(path: impl AsRef<Path>) -> Result<(SweepSpec, ExperimentConfig)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: SweepFile = serde_json::from_str(&text)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let base = match file.base {
            BaseConfig::Path(p) => ExperimentConfig::from_file(dir.join(p))?,
            BaseConfig::Inline(cfg) => {
                let mut cfg = *cfg;
                cfg.resolve_paths(dir);
                cfg
            }
        };
        Ok((file.spec, base))
    }
}

impl SweepSpec {
    pub fn validate(&self, clients: usize) -> Result<()> {
        if self.cooperative_counts.is_empty() {
            return Err(Error::Config("sweep needs at least one cooperative count".into()));
        }
        if let Some(&c) = self.cooperative_counts.iter().find(|&&c| c > clients) {
            return Err(Error::Config(format!("cooperative count {c} exceeds {clients} clients")));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("sweep needs at least one variant".into()));
        }
        if self.replicate_seeds.is_empty() {
            return Err(Error::Config("sweep needs at least one replicate seed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub cooperative: usize,
    pub variant: String,
    pub ranking: bool,
    pub seed: u64,
    /// Final-round validation metrics, or the error that stopped the run.
    pub result: std::result::Result<MetricSummary<f64>, String>,
    /// Mean per-client weight of cooperative clients over the last rounds.
    pub tail_weight_cooperative: Option<f64>,
    /// Mean per-client weight of the other clients over the last rounds.
    pub tail_weight_uncooperative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cooperative: usize,
    pub cooperative_ratio: f64,
    pub variant: String,
    pub ranking: bool,
    pub runs: usize,
    pub failures: usize,
    pub accuracy: (f64, f64),
    pub spd: (f64, f64),
    pub eod: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub clients: usize,
    pub cells: Vec<SweepCell>,
    /// One row per (cooperative count, variant), mean and sample stddev.
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn row(&self, cooperative: usize, variant: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.cooperative == cooperative && r.variant == variant)
    }

    pub fn cells_for(&self, cooperative: usize, variant: &str) -> impl Iterator<Item = &SweepCell> + '_ {
        let variant = variant.to_owned();
        self.cells
            .iter()
            .filter(move |c| c.cooperative == cooperative && c.variant == variant)
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "cooperative_count,cooperative_ratio,variant,ranking,runs,failures,\
             accuracy_mean,accuracy_std,spd_mean,spd_std,eod_mean,eod_std"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.cooperative,
                r.cooperative_ratio,
                r.variant,
                r.ranking,
                r.runs,
                r.failures,
                r.accuracy.0,
                r.accuracy.1,
                r.spd.0,
                r.spd.1,
                r.eod.0,
                r.eod.1
            )?;
        }
        Ok(())
    }

    pub fn write_cells_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "cooperative_count,variant,ranking,seed,status,accuracy,spd,eod,\
             tail_weight_cooperative,tail_weight_uncooperative,error"
        )?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            let (status, acc, spd, eod, err) = match &c.result {
                Ok(m) => ("ok", m.accuracy.to_string(), m.spd.to_string(), m.eod.to_string(), String::new()),
                Err(e) => ("failed", String::new(), String::new(), String::new(), e.replace([',', '\n'], ";")),
            };
            writeln!(
                out,
                "{},{},{},{},{status},{acc},{spd},{eod},{},{},{err}",
                c.cooperative,
                c.variant,
                c.ranking,
                c.seed,
                opt(c.tail_weight_cooperative),
                opt(c.tail_weight_uncooperative),
            )?;
        }
        Ok(())
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean per-client weight for cooperative and other clients over the last
/// [`TAIL_ROUNDS`] rounds.
fn tail_weights(outcome: &ExperimentOutcome) -> (Option<f64>, Option<f64>) {
    let start = outcome.reports.len().saturating_sub(TAIL_ROUNDS);
    let mut sums = [(0.0, 0usize); 2];
    for report in &outcome.reports[start..] {
        for c in &report.clients {
            if let Some(p) = c.weight {
                let k = usize::from(c.behavior != Behavior::Cooperative);
                sums[k].0 += p;
                sums[k].1 += 1;
            }
        }
    }
    let mean = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
    (mean(sums[0]), mean(sums[1]))
}

/// Client mix for a cell: `cooperative` cooperative clients (ids first),
/// the rest uncooperative with `skew`.
pub(crate) fn cell_clients(total: usize, cooperative: usize, skew: SkewSpec) -> Vec<ClientGroup> {
    let mut groups = Vec::new();
    if cooperative > 0 {
        groups.push(ClientGroup::new(Behavior::Cooperative, cooperative, None));
    }
    if total > cooperative {
        groups.push(ClientGroup::new(Behavior::Uncooperative, total - cooperative, Some(skew)));
    }
    groups
}

/// Runs every (count, variant, replicate) cell. Failed cells are recorded
/// and the sweep continues.
///
/// With `out_dir`, each cell writes its artifacts under
/// `cells/coop{count}-{variant}-seed{seed}/` and the sweep writes
/// `summary.csv` and `cells.csv`.
pub fn run_sweep(spec: &SweepSpec, base: &ExperimentConfig, out_dir: Option<&Path>) -> Result<SweepSummary> {
    let total = base.client_count();
    spec.validate(total)?;
    let skew = spec
        .uncooperative_skew
        .or_else(|| base.clients.iter().find_map(|g| g.skew))
        .ok_or_else(|| Error::Config("sweep needs an uncooperative skew (none in spec or base)".into()))?;
    skew.validate()?;

    let mut jobs = Vec::new();
    for &count in &spec.cooperative_counts {
        for variant in &spec.variants {
            for &seed in &spec.replicate_seeds {
                jobs.push((count, variant.clone(), seed));
            }
        }
    }

    let cells: Vec<SweepCell> = jobs
        .into_par_iter()
        .map(|(count, variant, seed)| {
            let mut cfg = base.clone();
            cfg.clients = cell_clients(total, count, skew);
            cfg.ranking.enabled = variant.ranking;
            cfg.seed = seed;
            cfg.out_dir = out_dir.map(|d| {
                d.join("cells")
                    .join(format!("coop{count}-{}-seed{seed}", variant.name))
            });
            let outcome = if cfg.out_dir.is_some() {
                run_experiment(&cfg)
            } else {
                Experiment::prepare(cfg).and_then(|e| e.run(&mut ()))
            };
            let (result, tails) = match outcome {
                Ok(o) => (
                    Ok(o.last().global.expect("round loop fills global metrics")),
                    tail_weights(&o),
                ),
                Err(e) => (Err(e.to_string()), (None, None)),
            };
            SweepCell {
                cooperative: count,
                variant: variant.name,
                ranking: variant.ranking,
                seed,
                result,
                tail_weight_cooperative: tails.0,
                tail_weight_uncooperative: tails.1,
            }
        })
        .collect();

    let mut rows = Vec::new();
    for &count in &spec.cooperative_counts {
        for variant in &spec.variants {
            let ok: Vec<MetricSummary<f64>> = cells
                .iter()
                .filter(|c| c.cooperative == count && c.variant == variant.name)
                .filter_map(|c| c.result.clone().ok())
                .collect();
            let column = |f: fn(&MetricSummary<f64>) -> f64| mean_std(&ok.iter().map(f).collect::<Vec<_>>());
            rows.push(SweepRow {
                cooperative: count,
                cooperative_ratio: count as f64 / total as f64,
                variant: variant.name.clone(),
                ranking: variant.ranking,
                runs: spec.replicate_seeds.len(),
                failures: spec.replicate_seeds.len() - ok.len(),
                accuracy: column(|m| m.accuracy),
                spd: column(|m| m.spd),
                eod: column(|m| m.eod),
            });
        }
    }
    let summary = SweepSummary {
        clients: total,
        cells,
        rows,
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| {
            let path = dir.join(name);
            let mut buf = Vec::new();
            f(&mut buf).and_then(|_| std::fs::write(&path, buf)).map_err(|e| Error::io(path, e))
        };
        write("summary.csv", &|b| summary.write_summary_csv(b))?;
        write("cells.csv", &|b| summary.write_cells_csv(b))?;
    }
    Ok(summary)
}
