//! Accuracy and group-fairness gaps over hard predictions, and the scoring
//! that turns them into the per-client composite used for aggregation.
//!
//! Every metric thresholds probabilities at 0.5 with ties counted positive.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Group, TabularDataset};
use crate::error::{Error, Result};
use crate::model::{classify, ModelParams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Accuracy,
    Spd,
    Eod,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 3] = [ObjectiveKind::Accuracy, ObjectiveKind::Spd, ObjectiveKind::Eod];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Accuracy => "accuracy",
            ObjectiveKind::Spd => "spd",
            ObjectiveKind::Eod => "eod",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps a fairness gap in [0, 1] to a higher-is-better score in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreTransform {
    /// `1 - gap`
    #[default]
    Complement,
    /// `1 / (1 + gap)`: 1 at zero gap, 0.5 at a full gap.
    Reciprocal,
}

impl ScoreTransform {
    pub fn apply<T: Real>(self, gap: T) -> T {
        match self {
            ScoreTransform::Complement => T::one() - gap,
            ScoreTransform::Reciprocal => T::one() / (T::one() + gap),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective<T> {
    pub kind: ObjectiveKind,
    pub weight: T,
}

/// Objectives the validator scores against, each with its weight γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Objective<T>>", into = "Vec<Objective<T>>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ObjectiveSpec<T> {
    entries: Vec<Objective<T>>,
}

impl<T: Real> ObjectiveSpec<T> {
    pub fn new(entries: impl IntoIterator<Item = (ObjectiveKind, T)>) -> Result<Self> {
        let entries: Vec<Objective<T>> = entries
            .into_iter()
            .map(|(kind, weight)| Objective { kind, weight })
            .collect();
        if entries.is_empty() {
            return Err(Error::InvalidObjectives("at least one objective is required".into()));
        }
        let mut total = T::zero();
        for (i, e) in entries.iter().enumerate() {
            if !(e.weight >= T::zero() && e.weight.is_finite()) {
                return Err(Error::InvalidObjectives(format!(
                    "weight of {} must be finite and non-negative, got {}",
                    e.kind, e.weight
                )));
            }
            if entries[..i].iter().any(|p| p.kind == e.kind) {
                return Err(Error::InvalidObjectives(format!("{} listed twice", e.kind)));
            }
            total = total + e.weight;
        }
        if total <= T::zero() {
            return Err(Error::InvalidObjectives("objective weights sum to zero".into()));
        }
        Ok(Self { entries })
    }

    /// Accuracy, SPD and EOD with unit weights.
    pub fn all_unit() -> Self {
        Self::new(ObjectiveKind::ALL.map(|k| (k, T::one()))).expect("valid spec")
    }

    pub fn single(kind: ObjectiveKind) -> Self {
        Self::new([(kind, T::one())]).expect("valid spec")
    }

    pub fn entries(&self) -> &[Objective<T>] {
        &self.entries
    }

    pub fn total_weight(&self) -> T {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// Same objectives with every weight multiplied by `alpha`.
    pub fn scaled(&self, alpha: T) -> Result<Self> {
        Self::new(self.entries.iter().map(|e| (e.kind, e.weight * alpha)))
    }
}

impl<T: Real> TryFrom<Vec<Objective<T>>> for ObjectiveSpec<T> {
    type Error = Error;

    fn try_from(entries: Vec<Objective<T>>) -> Result<Self> {
        Self::new(entries.into_iter().map(|e| (e.kind, e.weight)))
    }
}

impl<T> From<ObjectiveSpec<T>> for Vec<Objective<T>> {
    fn from(spec: ObjectiveSpec<T>) -> Self {
        spec.entries
    }
}

/// One client's validation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientScore<T> {
    pub client: usize,
    /// `Σ_j γ_j s_jk`
    pub composite: T,
    /// Raw per-objective scores `s_jk`, in spec order.
    pub objectives: Vec<(ObjectiveKind, T)>,
}

/// Composite and per-objective scores, one entry per participating client.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<T> {
    pub entries: Vec<ClientScore<T>>,
}

impl<T: Real> ScoreVector<T> {
    pub fn composites(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.composite).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn ensure_rows<T: Real>(dataset: &TabularDataset<T>, what: &'static str) -> Result<()> {
    if dataset.is_empty() {
        Err(Error::EmptyInput(what))
    } else {
        Ok(())
    }
}

fn rate<T: Real>(hits: usize, total: usize) -> T {
    T::count(hits) / T::count(total)
}

/// Fraction of rows whose prediction equals the label.
pub fn accuracy_of<T: Real>(predictions: &[bool], dataset: &TabularDataset<T>) -> Result<T> {
    ensure_rows(dataset, "accuracy of an empty dataset")?;
    let correct = predictions
        .iter()
        .zip(dataset.labels())
        .filter(|(p, y)| p == y)
        .count();
    Ok(rate(correct, dataset.len()))
}

/// `|P(Ŷ=1 | a) − P(Ŷ=1 | d)|` over the given predictions.
pub fn spd_of<T: Real>(predictions: &[bool], dataset: &TabularDataset<T>) -> Result<T> {
    let mut rows = [0usize; 2];
    let mut positive = [0usize; 2];
    for (&p, &g) in predictions.iter().zip(dataset.groups()) {
        let k = usize::from(g == Group::Disadvantaged);
        rows[k] += 1;
        positive[k] += usize::from(p);
    }
    if rows[0] == 0 {
        return Err(Error::MissingGroup(Group::Advantaged));
    }
    if rows[1] == 0 {
        return Err(Error::MissingGroup(Group::Disadvantaged));
    }
    Ok((rate::<T>(positive[0], rows[0]) - rate::<T>(positive[1], rows[1])).abs())
}

/// `|TPR_a − TPR_d|` over the given predictions.
pub fn eod_of<T: Real>(predictions: &[bool], dataset: &TabularDataset<T>) -> Result<T> {
    let mut positives = [0usize; 2];
    let mut hits = [0usize; 2];
    for ((&p, &g), &y) in predictions.iter().zip(dataset.groups()).zip(dataset.labels()) {
        if y {
            let k = usize::from(g == Group::Disadvantaged);
            positives[k] += 1;
            hits[k] += usize::from(p);
        }
    }
    if positives[0] == 0 {
        return Err(Error::MissingPositives(Group::Advantaged));
    }
    if positives[1] == 0 {
        return Err(Error::MissingPositives(Group::Disadvantaged));
    }
    Ok((rate::<T>(hits[0], positives[0]) - rate::<T>(hits[1], positives[1])).abs())
}

fn predictions<T: Real>(params: &ModelParams<T>, dataset: &TabularDataset<T>) -> Result<Vec<bool>> {
    classify(params, dataset, T::lit(0.5))
}

pub fn accuracy<T: Real>(params: &ModelParams<T>, dataset: &TabularDataset<T>) -> Result<T> {
    ensure_rows(dataset, "accuracy of an empty dataset")?;
    accuracy_of(&predictions(params, dataset)?, dataset)
}

pub fn spd<T: Real>(params: &ModelParams<T>, dataset: &TabularDataset<T>) -> Result<T> {
    spd_of(&predictions(params, dataset)?, dataset)
}

pub fn eod<T: Real>(params: &ModelParams<T>, dataset: &TabularDataset<T>) -> Result<T> {
    eod_of(&predictions(params, dataset)?, dataset)
}

/// Accuracy, SPD and EOD from a single prediction pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary<T> {
    pub accuracy: T,
    pub spd: T,
    pub eod: T,
}

pub fn summarize<T: Real>(params: &ModelParams<T>, dataset: &TabularDataset<T>) -> Result<MetricSummary<T>> {
    let preds = predictions(params, dataset)?;
    Ok(MetricSummary {
        accuracy: accuracy_of(&preds, dataset)?,
        spd: spd_of(&preds, dataset)?,
        eod: eod_of(&preds, dataset)?,
    })
}

fn score_from_predictions<T: Real>(
    kind: ObjectiveKind,
    preds: &[bool],
    validation: &TabularDataset<T>,
    transform: ScoreTransform,
) -> Result<T> {
    let wrap = |source: Error| Error::Objective {
        objective: kind,
        source: Box::new(source),
    };
    match kind {
        ObjectiveKind::Accuracy => accuracy_of(preds, validation).map_err(wrap),
        ObjectiveKind::Spd => spd_of(preds, validation).map(|g| transform.apply(g)).map_err(wrap),
        ObjectiveKind::Eod => eod_of(preds, validation).map(|g| transform.apply(g)).map_err(wrap),
    }
}

/// Higher-is-better score in [0, 1] for one objective, using `1 - gap` for
/// the fairness gaps.
pub fn objective_score<T: Real>(
    kind: ObjectiveKind,
    params: &ModelParams<T>,
    validation: &TabularDataset<T>,
) -> Result<T> {
    objective_score_with(kind, params, validation, ScoreTransform::Complement)
}

pub fn objective_score_with<T: Real>(
    kind: ObjectiveKind,
    params: &ModelParams<T>,
    validation: &TabularDataset<T>,
    transform: ScoreTransform,
) -> Result<T> {
    score_from_predictions(kind, &predictions(params, validation)?, validation, transform)
}

/// Composite `Σ_j γ_j s_j` together with the raw per-objective scores.
pub fn score_breakdown<T: Real>(
    params: &ModelParams<T>,
    validation: &TabularDataset<T>,
    spec: &ObjectiveSpec<T>,
    transform: ScoreTransform,
) -> Result<(T, Vec<(ObjectiveKind, T)>)> {
    let preds = predictions(params, validation)?;
    let mut composite = T::zero();
    let mut parts = Vec::with_capacity(spec.entries().len());
    for obj in spec.entries() {
        let s = score_from_predictions(obj.kind, &preds, validation, transform)?;
        composite = composite + obj.weight * s;
        parts.push((obj.kind, s));
    }
    Ok((composite, parts))
}

pub fn composite_score<T: Real>(
    params: &ModelParams<T>,
    validation: &TabularDataset<T>,
    spec: &ObjectiveSpec<T>,
) -> Result<T> {
    score_breakdown(params, validation, spec, ScoreTransform::Complement).map(|(c, _)| c)
}
