//! Per-round records emitted by every strategy, and their JSON-lines / CSV
//! encodings.

use std::io::Write;

use serde::Serialize;

use crate::data::{Behavior, ClientProfile};
use crate::metrics::{MetricSummary, ObjectiveKind};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientRecord<T> {
    pub client: usize,
    pub behavior: Behavior,
    /// Local example count `n_k`.
    pub n: usize,
    /// Loss of the round's starting global model on the client's data.
    pub local_loss: T,
    pub score_accuracy: Option<T>,
    pub score_spd: Option<T>,
    pub score_eod: Option<T>,
    /// `Σ_j γ_j s_jk`
    pub composite: Option<T>,
    /// Aggregation weight `p_k`.
    pub weight: Option<T>,
    /// Cumulative rank score `rs_k` after this round.
    pub rank: Option<T>,
}

impl<T: Real> ClientRecord<T> {
    pub fn new(client: &ClientProfile<T>, local_loss: T) -> Self {
        Self {
            client: client.id,
            behavior: client.behavior,
            n: client.n(),
            local_loss,
            score_accuracy: None,
            score_spd: None,
            score_eod: None,
            composite: None,
            weight: None,
            rank: None,
        }
    }

    pub fn set_objective_scores(&mut self, scores: &[(ObjectiveKind, T)]) {
        for &(kind, s) in scores {
            match kind {
                ObjectiveKind::Accuracy => self.score_accuracy = Some(s),
                ObjectiveKind::Spd => self.score_spd = Some(s),
                ObjectiveKind::Eod => self.score_eod = Some(s),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport<T> {
    /// 1-based round index; strategies emit 0 and the round loop stamps it.
    pub round: usize,
    /// Metrics of the new global model on the validation set.
    pub global: Option<MetricSummary<T>>,
    /// Max/min ratio of the rank scores, when ranking is on.
    pub rank_spread: Option<T>,
    pub clients: Vec<ClientRecord<T>>,
}

impl<T: Real> RoundReport<T> {
    pub fn weights(&self) -> Vec<Option<T>> {
        self.clients.iter().map(|c| c.weight).collect()
    }
}

fn opt<T: Real>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CSV_HEADER: &str = "round,scope,client,behavior,n,local_loss,score_accuracy,score_spd,score_eod,composite,weight,rank,accuracy,spd,eod";

fn behavior_name(b: Behavior) -> &'static str {
    match b {
        Behavior::Cooperative => "cooperative",
        Behavior::Normal => "normal",
        Behavior::Uncooperative => "uncooperative",
    }
}

/// Writes one CSV row per client followed by one `global` row.
pub fn write_csv_rows<T: Real, W: Write>(report: &RoundReport<T>, out: &mut W) -> std::io::Result<()> {
    for c in &report.clients {
        writeln!(
            out,
            "{},client,{},{},{},{},{},{},{},{},{},{},,,",
            report.round,
            c.client,
            behavior_name(c.behavior),
            c.n,
            c.local_loss,
            opt(c.score_accuracy),
            opt(c.score_spd),
            opt(c.score_eod),
            opt(c.composite),
            opt(c.weight),
            opt(c.rank),
        )?;
    }
    let g = report.global.as_ref();
    writeln!(
        out,
        "{},global,,,{},,,,,,,{},{},{},{}",
        report.round,
        report.clients.iter().map(|c| c.n).sum::<usize>(),
        opt(report.rank_spread),
        opt(g.map(|m| m.accuracy)),
        opt(g.map(|m| m.spd)),
        opt(g.map(|m| m.eod)),
    )
}
