//! Reference aggregation strategies: FedAvg, the q-fair family (q-FedSGD and
//! q-FedAvg) and agnostic (minimax) federated learning.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ClientProfile;
use crate::error::{Error, Result};
use crate::fedval::{aggregate, base_records, local_updates, AggregationWeights};
use crate::model::{gradient, loss, ModelParams, TrainConfig};
use crate::report::RoundReport;
use crate::scalar::Real;

/// Parameters of the q-fair strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QConfig<T> {
    /// Fairness exponent; 0 recovers unweighted averaging.
    pub q: T,
    /// Lipschitz estimate `L` of the local gradients.
    pub lipschitz: T,
    /// Local SGD rate used by q-FedAvg clients.
    pub learning_rate: T,
}

impl<T: Real> QConfig<T> {
    pub fn new(q: T, lipschitz: T, learning_rate: T) -> Self {
        Self {
            q,
            lipschitz,
            learning_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= T::zero() && self.q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q must be finite and >= 0, got {}", self.q)));
        }
        if !(self.lipschitz > T::zero() && self.lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lipschitz estimate must be > 0, got {}", self.lipschitz)));
        }
        if !(self.learning_rate > T::zero() && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Mixture weights λ over clients for agnostic federated learning.
#[derive(Debug, Clone, PartialEq)]
pub struct AflState<T> {
    /// λ_k, aligned with the client list passed to [`afl_round`].
    pub lambda: Vec<T>,
    /// Step size of the projected ascent on λ.
    pub lambda_learning_rate: T,
}

impl<T: Real> AflState<T> {
    pub fn uniform(clients: usize, lambda_learning_rate: T) -> Self {
        Self {
            lambda: vec![T::one() / T::count(clients); clients],
            lambda_learning_rate,
        }
    }
}

/// Output of one baseline round.
#[derive(Debug, Clone)]
pub struct BaselineRound<T> {
    pub params: ModelParams<T>,
    /// Effective per-client weights, as reported in `p_k`.
    pub weights: AggregationWeights<T>,
    pub report: RoundReport<T>,
}

fn ids<T: Real>(clients: &[ClientProfile<T>]) -> Vec<usize> {
    clients.iter().map(|c| c.id).collect()
}

fn finish<T: Real>(
    global: &ModelParams<T>,
    clients: &[ClientProfile<T>],
    params: ModelParams<T>,
    weights: AggregationWeights<T>,
) -> Result<BaselineRound<T>> {
    let mut records = base_records(global, clients)?;
    for (r, &p) in records.iter_mut().zip(weights.as_slice()) {
        r.weight = Some(p);
    }
    Ok(BaselineRound {
        params,
        weights,
        report: RoundReport {
            round: 0,
            global: None,
            rank_spread: None,
            clients: records,
        },
    })
}

/// Local training on every client, then averaging with `p_k = n_k / n`.
pub fn fedavg_round<T: Real>(
    global: &ModelParams<T>,
    clients: &[ClientProfile<T>],
    train: &TrainConfig<T>,
) -> Result<BaselineRound<T>> {
    if clients.is_empty() {
        return Err(Error::EmptyInput("no clients"));
    }
    let sizes: Vec<T> = clients.iter().map(|c| T::count(c.n())).collect();
    let weights = AggregationWeights::normalize(ids(clients), &sizes)?;
    let models = local_updates(global, clients, train)?;
    let params = aggregate(&models, &weights)?;
    finish(global, clients, params, weights)
}

/// `F_k^q` and the client's loss, failing on overflow.
fn loss_power<T: Real>(client: &ClientProfile<T>, global: &ModelParams<T>, q: T) -> Result<(T, T)> {
    let f = loss(global, &client.data)?;
    let fq = f.powf(q);
    if !fq.is_finite() {
        return Err(Error::NumericOverflow {
            client: client.id,
            detail: format!("loss {f} raised to q = {q} is not finite"),
        });
    }
    Ok((f, fq))
}

/// Applies `w ← w − ΣΔ_k / Σh_k`, summing in ascending client-id order.
fn q_step<T: Real>(
    global: &ModelParams<T>,
    clients: &[ClientProfile<T>],
    deltas: &[ModelParams<T>],
    h: &[T],
) -> Result<ModelParams<T>> {
    let mut order: Vec<usize> = (0..clients.len()).collect();
    order.sort_by_key(|&i| clients[i].id);
    let mut delta_sum = ModelParams::zeros(global.dim());
    let mut h_sum = T::zero();
    for i in order {
        delta_sum = delta_sum.zip_with(&deltas[i], |a, b| a + b)?;
        h_sum = h_sum + h[i];
    }
    if !(h_sum > T::zero() && h_sum.is_finite()) {
        return Err(Error::DegenerateWeights(format!("q-step normalizer {h_sum} is not positive and finite")));
    }
    global.zip_with(&delta_sum, |w, d| w - d / h_sum)
}

/// Relative loss reweighting `F_k^q / Σ F^q` reported as `p_k`.
fn q_weights<T: Real>(clients: &[ClientProfile<T>], powers: &[T]) -> Result<AggregationWeights<T>> {
    AggregationWeights::normalize(ids(clients), powers)
}

/// One q-FedSGD step from full local gradients:
/// `Δ_k = F_k^q ∇F_k`, `h_k = q F_k^{q−1} ‖∇F_k‖² + L F_k^q`.
pub fn qfedsgd_round<T: Real>(
    global: &ModelParams<T>,
    clients: &[ClientProfile<T>],
    qcfg: &QConfig<T>,
) -> Result<BaselineRound<T>> {
    qcfg.validate()?;
    if clients.is_empty() {
        return Err(Error::EmptyInput("no clients"));
    }
    let q = qcfg.q;
    let parts = clients
        .par_iter()
        .map(|c| {
            let (f, fq) = loss_power(c, global, q)?;
            let g = gradient(global, &c.data)?;
            let h = q * f.powf(q - T::one()) * g.norm_sq() + qcfg.lipschitz * fq;
            Ok((g.as_params().map(|v| fq * v), h, fq))
        })
        .collect::<Result<Vec<_>>>()?;
    let deltas: Vec<_> = parts.iter().map(|p| p.0.clone()).collect();
    let h: Vec<T> = parts.iter().map(|p| p.1).collect();
    let powers: Vec<T> = parts.iter().map(|p| p.2).collect();
    let params = q_step(global, clients, &deltas, &h)?;
    finish(global, clients, params, q_weights(clients, &powers)?)
}

/// One q-FedAvg round: clients run local SGD to `w̄_k`, then
/// `Δw_k = L (w − w̄_k)`, `Δ_k = F_k^q Δw_k`,
/// `h_k = q F_k^{q−1} ‖Δw_k‖² + L F_k^q`. `F_k` is taken at the starting `w`.
pub fn qfedavg_round<T: Real>(
    global: &ModelParams<T>,
    clients: &[ClientProfile<T>],
    qcfg: &QConfig<T>,
    train: &TrainConfig<T>,
) -> Result<BaselineRound<T>> {
    qcfg.validate()?;
    if clients.is_empty() {
        return Err(Error::EmptyInput("no clients"));
    }
    let q = qcfg.q;
    let l = qcfg.lipschitz;
    let local = local_updates(global, clients, train)?;
    let mut deltas = Vec::with_capacity(clients.len());
    let mut h = Vec::with_capacity(clients.len());
    let mut powers = Vec::with_capacity(clients.len());
    for (c, w_bar) in clients.iter().zip(&local) {
        let (f, fq) = loss_power(c, global, q)?;
        let dw = global.zip_with(w_bar, |w, wb| l * (w - wb))?;
        h.push(q * f.powf(q - T::one()) * dw.norm_sq() + l * fq);
        deltas.push(dw.map(|v| fq * v));
        powers.push(fq);
    }
    let params = q_step(global, clients, &deltas, &h)?;
    finish(global, clients, params, q_weights(clients, &powers)?)
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex<T: Real>(v: &[T]) -> Vec<T> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
    let mut cumulative = T::zero();
    let mut theta = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumulative = cumulative + u;
        let candidate = (cumulative - T::one()) / T::count(j + 1);
        if u - candidate > T::zero() {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

/// One agnostic-FL round: local training, aggregation with the mixture λ,
/// then projected gradient ascent `λ ← Π(λ + η_λ F)` with losses taken at
/// the starting model.
pub fn afl_round<T: Real>(
    global: &ModelParams<T>,
    clients: &[ClientProfile<T>],
    state: &AflState<T>,
    train: &TrainConfig<T>,
) -> Result<(BaselineRound<T>, AflState<T>)> {
    if clients.is_empty() {
        return Err(Error::EmptyInput("no clients"));
    }
    if state.lambda.len() != clients.len() {
        return Err(Error::Shape {
            expected: clients.len(),
            found: state.lambda.len(),
        });
    }
    if !(state.lambda_learning_rate > T::zero() && state.lambda_learning_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda learning rate must be > 0, got {}",
            state.lambda_learning_rate
        )));
    }
    let weights = AggregationWeights::new(ids(clients), state.lambda.clone())?;
    let losses = clients
        .par_iter()
        .map(|c| loss(global, &c.data))
        .collect::<Result<Vec<T>>>()?;
    let models = local_updates(global, clients, train)?;
    let params = aggregate(&models, &weights)?;
    let ascended: Vec<T> = state
        .lambda
        .iter()
        .zip(&losses)
        .map(|(&l, &f)| l + state.lambda_learning_rate * f)
        .collect();
    let next = AflState {
        lambda: project_simplex(&ascended),
        lambda_learning_rate: state.lambda_learning_rate,
    };
    Ok((finish(global, clients, params, weights)?, next))
}
