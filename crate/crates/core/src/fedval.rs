//! Validation-weighted aggregation.
//!
//! Each round every client trains from the current global model; the server
//! blends each returned model with the global one, scores the blend on its
//! held-out validation set against the configured objectives, optionally
//! converts the scores into cumulative geometric rank rewards, and averages
//! the client models with weights proportional to score (or rank).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClientProfile, TabularDataset};
use crate::error::{Error, Result};
use crate::metrics::{score_breakdown, summarize, ClientScore, ObjectiveSpec, ScoreTransform, ScoreVector};
use crate::model::{client_update, loss, ModelParams, TrainConfig};
use crate::report::{ClientRecord, RoundReport};
use crate::scalar::Real;
use crate::seed::client_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig<T> {
    pub enabled: bool,
    /// Reward given to the lowest-scoring client (μ).
    pub initial_step: T,
    /// Factor applied to the reward after each client in ascending order (ρ).
    pub step_size: T,
}

impl<T: Real> RankingConfig<T> {
    pub fn new(initial_step: T, step_size: T) -> Self {
        Self {
            enabled: true,
            initial_step,
            step_size,
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            initial_step: T::one(),
            step_size: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        if !ok(self.initial_step) || !ok(self.step_size) {
            return Err(Error::InvalidParameter(format!(
                "ranking needs positive finite initial step and step size, got {} and {}",
                self.initial_step, self.step_size
            )));
        }
        Ok(())
    }

    /// Non-fatal configuration concerns.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.enabled && self.step_size < T::one() {
            out.push(format!(
                "ranking step size {} < 1 rewards low-scoring clients more than high-scoring ones",
                self.step_size
            ));
        }
        out
    }

    /// Total reward handed out per round to `clients` clients:
    /// `μ (ρ^K − 1) / (ρ − 1)`, or `K μ` when ρ = 1.
    pub fn round_mass(&self, clients: usize) -> T {
        let k = T::count(clients);
        if self.step_size == T::one() {
            self.initial_step * k
        } else {
            self.initial_step * (self.step_size.powf(k) - T::one()) / (self.step_size - T::one())
        }
    }
}

/// Cumulative rank scores `rs_k`, zero for clients never ranked.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankState<T> {
    scores: BTreeMap<usize, T>,
}

impl<T: Real> RankState<T> {
    pub fn new() -> Self {
        Self { scores: BTreeMap::new() }
    }

    pub fn get(&self, client: usize) -> T {
        self.scores.get(&client).copied().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.scores.iter().map(|(&k, &v)| (k, v))
    }

    pub fn total(&self) -> T {
        self.scores.values().copied().sum()
    }

    /// Largest over smallest rank score among `clients`.
    pub fn spread(&self, clients: impl IntoIterator<Item = usize>) -> Option<T> {
        let values: Vec<T> = clients.into_iter().map(|c| self.get(c)).collect();
        let max = values.iter().copied().fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.max(v))))?;
        let min = values.iter().copied().fold(max, T::min);
        Some(max / min)
    }
}

/// Convex aggregation coefficients `p_k`, aligned with a client id list.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationWeights<T> {
    clients: Vec<usize>,
    weights: Vec<T>,
}

impl<T: Real> AggregationWeights<T> {
    pub fn new(clients: Vec<usize>, weights: Vec<T>) -> Result<Self> {
        if clients.len() != weights.len() {
            return Err(Error::Shape {
                expected: clients.len(),
                found: weights.len(),
            });
        }
        if weights.is_empty() {
            return Err(Error::EmptyInput("aggregation weights"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= T::zero() && w.is_finite())) {
            return Err(Error::DegenerateWeights(format!("weight {w} is negative or non-finite")));
        }
        let sum: T = weights.iter().copied().sum();
        if (sum - T::one()).abs() > T::simplex_tolerance(weights.len()) {
            return Err(Error::DegenerateWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { clients, weights })
    }

    /// Normalizes non-negative `mass` into weights.
    pub fn normalize(clients: Vec<usize>, mass: &[T]) -> Result<Self> {
        if let Some(m) = mass.iter().find(|m| !(**m >= T::zero() && m.is_finite())) {
            return Err(Error::DegenerateWeights(format!("score {m} is negative or non-finite")));
        }
        let total: T = mass.iter().copied().sum();
        if !(total > T::zero() && total.is_finite()) {
            return Err(Error::DegenerateWeights(format!(
                "score mass {total} cannot be normalized"
            )));
        }
        Self::new(clients, mass.iter().map(|&m| m / total).collect())
    }

    pub fn uniform(clients: Vec<usize>) -> Result<Self> {
        let ones = vec![T::one(); clients.len()];
        Self::normalize(clients, &ones)
    }

    pub fn clients(&self) -> &[usize] {
        &self.clients
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }

    pub fn get(&self, client: usize) -> Option<T> {
        self.clients.iter().position(|&c| c == client).map(|i| self.weights[i])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `alpha · client + (1 − alpha) · global`.
pub fn temp_aggregate<T: Real>(global: &ModelParams<T>, client: &ModelParams<T>, alpha: T) -> Result<ModelParams<T>> {
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidParameter(format!("blend {alpha} outside [0, 1]")));
    }
    global.zip_with(client, |g, c| alpha * c + (T::one() - alpha) * g)
}

/// Scores every client model blended with `global` on the validation set.
pub fn score_clients<T: Real>(
    global: &ModelParams<T>,
    client_models: &[(usize, ModelParams<T>)],
    validation: &TabularDataset<T>,
    spec: &ObjectiveSpec<T>,
    alpha: T,
) -> Result<ScoreVector<T>> {
    score_clients_with(global, client_models, validation, spec, alpha, ScoreTransform::Complement)
}

pub fn score_clients_with<T: Real>(
    global: &ModelParams<T>,
    client_models: &[(usize, ModelParams<T>)],
    validation: &TabularDataset<T>,
    spec: &ObjectiveSpec<T>,
    alpha: T,
    transform: ScoreTransform,
) -> Result<ScoreVector<T>> {
    if client_models.is_empty() {
        return Err(Error::EmptyInput("no client models to score"));
    }
    let entries = client_models
        .par_iter()
        .map(|(client, model)| {
            let blended = temp_aggregate(global, model, alpha)?;
            let (composite, objectives) = score_breakdown(&blended, validation, spec, transform)?;
            Ok(ClientScore {
                client: *client,
                composite,
                objectives,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreVector { entries })
}

/// Client ids ordered worst composite first, ties by ascending id.
pub fn ascending_order<T: Real>(scores: &ScoreVector<T>) -> Vec<usize> {
    let mut ranked: Vec<(T, usize)> = scores.entries.iter().map(|e| (e.composite, e.client)).collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores").then(a.1.cmp(&b.1)));
    ranked.into_iter().map(|(_, c)| c).collect()
}

/// Adds the geometric rewards `μ ρ^i` to the clients in ascending score order.
pub fn rank_update<T: Real>(scores: &ScoreVector<T>, state: &RankState<T>, cfg: &RankingConfig<T>) -> Result<RankState<T>> {
    if !cfg.enabled {
        return Err(Error::InvalidParameter("rank update requested with ranking disabled".into()));
    }
    cfg.validate()?;
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scores to rank"));
    }
    let mut next = state.clone();
    let mut step = cfg.initial_step;
    for client in ascending_order(scores) {
        let entry = next.scores.entry(client).or_insert_with(T::zero);
        *entry = *entry + step;
        step = step * cfg.step_size;
    }
    Ok(next)
}

/// Normalizes rank scores (when `state` is given) or composite scores.
pub fn make_weights<T: Real>(scores: &ScoreVector<T>, state: Option<&RankState<T>>) -> Result<AggregationWeights<T>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no scores to weight"));
    }
    let clients: Vec<usize> = scores.entries.iter().map(|e| e.client).collect();
    let mass: Vec<T> = match state {
        Some(rs) => clients.iter().map(|&c| rs.get(c)).collect(),
        None => scores.composites(),
    };
    AggregationWeights::normalize(clients, &mass)
}

/// Weighted sum of client models, accumulated in ascending client-id order.
///
/// `client_models[i]` belongs to `weights.clients()[i]`.
pub fn aggregate<T: Real>(client_models: &[ModelParams<T>], weights: &AggregationWeights<T>) -> Result<ModelParams<T>> {
    if client_models.len() != weights.len() {
        return Err(Error::Shape {
            expected: weights.len(),
            found: client_models.len(),
        });
    }
    let first = client_models.first().ok_or(Error::EmptyInput("no client models to aggregate"))?;
    let dim = first.dim();
    let mut order: Vec<usize> = (0..client_models.len()).collect();
    order.sort_by_key(|&i| weights.clients()[i]);
    let mut acc = ModelParams::zeros(dim);
    for i in order {
        let p = weights.as_slice()[i];
        acc = acc.zip_with(&client_models[i], |a, w| a + p * w)?;
    }
    Ok(acc)
}

/// Runs local training for every client from `global`, in parallel.
///
/// Client `k` trains with seed `client_seed(train.seed, rng_stream_k)`.
pub(crate) fn local_updates<T: Real>(
    global: &ModelParams<T>,
    clients: &[ClientProfile<T>],
    train: &TrainConfig<T>,
) -> Result<Vec<ModelParams<T>>> {
    clients
        .par_iter()
        .map(|c| client_update(global, &c.data, &train.with_seed(client_seed(train.seed, c.rng_stream))))
        .collect()
}

/// Loss of `global` on every client's data, with base report records.
pub(crate) fn base_records<T: Real>(global: &ModelParams<T>, clients: &[ClientProfile<T>]) -> Result<Vec<ClientRecord<T>>> {
    clients
        .par_iter()
        .map(|c| Ok(ClientRecord::new(c, loss(global, &c.data)?)))
        .collect()
}

/// Everything the server needs besides the clients and the model.
#[derive(Debug, Clone, PartialEq)]
pub struct FedValConfig<T> {
    pub objectives: ObjectiveSpec<T>,
    /// Weight of the client model in the temporary blend used for scoring.
    pub blend: T,
    pub transform: ScoreTransform,
    pub ranking: RankingConfig<T>,
}

impl<T: Real> FedValConfig<T> {
    pub fn new(objectives: ObjectiveSpec<T>, ranking: RankingConfig<T>) -> Self {
        Self {
            objectives,
            blend: T::lit(0.5),
            transform: ScoreTransform::Complement,
            ranking,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blend >= T::zero() && self.blend <= T::one()) {
            return Err(Error::InvalidParameter(format!("blend {} outside [0, 1]", self.blend)));
        }
        if self.ranking.enabled {
            self.ranking.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FedValRound<T> {
    pub params: ModelParams<T>,
    pub report: RoundReport<T>,
    pub state: RankState<T>,
    pub scores: ScoreVector<T>,
    pub weights: AggregationWeights<T>,
}

/// One server round: train, score, optionally rank, aggregate.
pub fn fedval_round<T: Real>(
    global: &ModelParams<T>,
    clients: &[ClientProfile<T>],
    validation: &TabularDataset<T>,
    cfg: &FedValConfig<T>,
    train: &TrainConfig<T>,
    state: &RankState<T>,
) -> Result<FedValRound<T>> {
    cfg.validate()?;
    if clients.is_empty() {
        return Err(Error::EmptyInput("no clients"));
    }
    let mut records = base_records(global, clients)?;
    let models = local_updates(global, clients, train)?;
    let tagged: Vec<(usize, ModelParams<T>)> = clients.iter().map(|c| c.id).zip(models.iter().cloned()).collect();
    let scores = score_clients_with(global, &tagged, validation, &cfg.objectives, cfg.blend, cfg.transform)?;
    let state = if cfg.ranking.enabled {
        rank_update(&scores, state, &cfg.ranking)?
    } else {
        state.clone()
    };
    let weights = make_weights(&scores, cfg.ranking.enabled.then_some(&state))?;
    let params = aggregate(&models, &weights)?;
    let global_metrics = summarize(&params, validation)?;

    for ((record, score), &p) in records.iter_mut().zip(&scores.entries).zip(weights.as_slice()) {
        record.set_objective_scores(&score.objectives);
        record.composite = Some(score.composite);
        record.weight = Some(p);
        if cfg.ranking.enabled {
            record.rank = Some(state.get(record.client));
        }
    }
    let report = RoundReport {
        round: 0,
        global: Some(global_metrics),
        rank_spread: cfg
            .ranking
            .enabled
            .then(|| state.spread(clients.iter().map(|c| c.id)))
            .flatten(),
        clients: records,
    };
    Ok(FedValRound {
        params,
        report,
        state,
        scores,
        weights,
    })
}
