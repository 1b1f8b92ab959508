//! Binary logistic regression and the local mini-batch SGD that clients run
//! each round.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real};
use crate::seed;

/// Weight vector and bias of a logistic-regression classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(weights: Vec<T>, bias: T) -> Self {
        Self { weights, bias }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![T::zero(); dim],
            bias: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn ensure_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: self.dim(),
                found: dim,
            })
        }
    }

    /// `wᵀx + b`.
    pub fn logit(&self, x: &[T]) -> T {
        self.weights
            .iter()
            .zip(x)
            .fold(self.bias, |acc, (&w, &v)| acc + w * v)
    }

    /// Weights followed by the bias.
    pub fn coords(&self) -> impl Iterator<Item = T> + '_ {
        self.weights.iter().copied().chain(std::iter::once(self.bias))
    }

    /// Applies `f` coordinate-wise to `self` and `other` (bias included).
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_dim(other.dim())?;
        Ok(Self {
            weights: self
                .weights
                .iter()
                .zip(&other.weights)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            bias: f(self.bias, other.bias),
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            weights: self.weights.iter().map(|&w| f(w)).collect(),
            bias: f(self.bias),
        }
    }

    /// Squared Euclidean norm over weights and bias.
    pub fn norm_sq(&self) -> T {
        self.coords().map(|c| c * c).sum()
    }

    /// `self - step * gradient`.
    pub fn step(&self, gradient: &Gradient<T>, step: T) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .zip(&gradient.weights)
                .map(|(&w, &g)| w - step * g)
                .collect(),
            bias: self.bias - step * gradient.bias,
        }
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            weights: self.weights.iter().map(|w| U::from(*w).expect("finite weight")).collect(),
            bias: U::from(self.bias).expect("finite bias"),
        }
    }
}

/// Gradient of the mean cross-entropy with respect to weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Real> Gradient<T> {
    pub fn norm_sq(&self) -> T {
        self.weights.iter().map(|&g| g * g).sum::<T>() + self.bias * self.bias
    }

    pub fn as_params(&self) -> ModelParams<T> {
        ModelParams::new(self.weights.clone(), self.bias)
    }
}

/// Local training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: T,
    pub seed: u64,
}

impl<T: Real> TrainConfig<T> {
    pub fn new(epochs: usize, batch_size: usize, learning_rate: T, seed: u64) -> Self {
        Self {
            epochs,
            batch_size,
            learning_rate,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("local epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        if !(self.learning_rate > T::zero() && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

pub fn predict_proba<T: Real>(params: &ModelParams<T>, dataset: &TabularDataset<T>) -> Result<Vec<T>> {
    params.ensure_dim(dataset.dim())?;
    Ok(dataset.rows().map(|x| sigmoid(params.logit(x))).collect())
}

/// Hard predictions: positive iff probability >= `threshold`.
pub fn classify<T: Real>(params: &ModelParams<T>, dataset: &TabularDataset<T>, threshold: T) -> Result<Vec<bool>> {
    Ok(predict_proba(params, dataset)?
        .into_iter()
        .map(|p| p >= threshold)
        .collect())
}

/// Mean binary cross-entropy with probabilities clamped to
/// `[floor, 1 - floor]` (see [`Real::prob_floor`]).
pub fn loss<T: Real>(params: &ModelParams<T>, dataset: &TabularDataset<T>) -> Result<T> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("loss of an empty dataset"));
    }
    let floor = T::prob_floor();
    let ceil = T::one() - floor;
    let probs = predict_proba(params, dataset)?;
    let total: T = probs
        .into_iter()
        .zip(dataset.labels())
        .map(|(p, &y)| {
            let p = p.max(floor).min(ceil);
            if y {
                -p.ln()
            } else {
                -(T::one() - p).ln()
            }
        })
        .sum();
    Ok(total / T::count(dataset.len()))
}

pub fn gradient<T: Real>(params: &ModelParams<T>, dataset: &TabularDataset<T>) -> Result<Gradient<T>> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("gradient of an empty dataset"));
    }
    params.ensure_dim(dataset.dim())?;
    Ok(gradient_rows(params, dataset, 0..dataset.len()))
}

/// Mean-over-rows gradient, accumulated in the order `rows` yields them.
fn gradient_rows<T: Real>(
    params: &ModelParams<T>,
    dataset: &TabularDataset<T>,
    rows: impl Iterator<Item = usize>,
) -> Gradient<T> {
    let mut weights = vec![T::zero(); params.dim()];
    let mut bias = T::zero();
    let mut count = 0usize;
    for i in rows {
        let x = dataset.row(i);
        let y = if dataset.label(i) { T::one() } else { T::zero() };
        let residual = sigmoid(params.logit(x)) - y;
        for (g, &v) in weights.iter_mut().zip(x) {
            *g = *g + residual * v;
        }
        bias = bias + residual;
        count += 1;
    }
    let n = T::count(count);
    Gradient {
        weights: weights.into_iter().map(|g| g / n).collect(),
        bias: bias / n,
    }
}

/// Per-epoch visiting orders used by [`client_update`].
///
/// Entries are positions into the dataset's [`TabularDataset::canonical_order`].
pub fn epoch_orders(n: usize, epochs: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = seed::rng(seed);
    (0..epochs)
        .map(|_| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect()
}

/// Runs `cfg.epochs` epochs of mini-batch SGD from `params` on `local`.
///
/// Rows are visited in the canonical order permuted by [`epoch_orders`], so
/// the result depends on the multiset of rows and the seed, never on the
/// input row order. The trailing partial batch of each epoch is trained on.
pub fn client_update<T: Real>(
    params: &ModelParams<T>,
    local: &TabularDataset<T>,
    cfg: &TrainConfig<T>,
) -> Result<ModelParams<T>> {
    cfg.validate()?;
    if local.is_empty() {
        return Err(Error::EmptyInput("client update on an empty dataset"));
    }
    params.ensure_dim(local.dim())?;
    let canonical = local.canonical_order();
    let mut current = params.clone();
    for order in epoch_orders(local.len(), cfg.epochs, cfg.seed) {
        for batch in order.chunks(cfg.batch_size) {
            let grad = gradient_rows(&current, local, batch.iter().map(|&p| canonical[p]));
            current = current.step(&grad, cfg.learning_rate);
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Group;

    fn ds(rows: &[Vec<f64>], labels: &[bool]) -> TabularDataset<f64> {
        TabularDataset::from_rows(rows, labels.to_vec(), vec![Group::Advantaged; rows.len()]).unwrap()
    }

    #[test]
    fn predict_proba_cases() {
        let d = ds(&[vec![2.0, 1.0], vec![-3.0, 5.0]], &[true, false]);
        assert_eq!(predict_proba(&ModelParams::zeros(2), &d).unwrap(), vec![0.5, 0.5]);
        let saturated = ModelParams::new(vec![0.0, 0.0], 20.0);
        assert!(predict_proba(&saturated, &d).unwrap().iter().all(|&p| p > 0.999_999));
        let p = predict_proba(&ModelParams::new(vec![1.0, -1.0], 0.0), &d).unwrap();
        let oracle = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((p[0] - oracle).abs() < 1e-6);
        assert!((p[0] - 0.731_059).abs() < 1e-6);
        assert!(matches!(
            predict_proba(&ModelParams::zeros(3), &d),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn classify_thresholds() {
        // logits ln(0.4/0.6) and ln(0.6/0.4) give probabilities 0.4 and 0.6.
        let d = ds(&[vec![(0.4f64 / 0.6).ln()], vec![(0.6f64 / 0.4).ln()], vec![0.0]], &[true, true, true]);
        let m = ModelParams::new(vec![1.0], 0.0);
        assert_eq!(classify(&m, &d, 0.5).unwrap(), vec![false, true, true]);
        assert_eq!(classify(&m, &d, 0.0).unwrap(), vec![true, true, true]);
    }

    #[test]
    fn loss_cases() {
        let d = ds(&[vec![2.0], vec![-1.0]], &[true, false]);
        assert!((loss(&ModelParams::zeros(1), &d).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        // -ln σ(2) - ln(1 - σ(-1)), evaluated by hand.
        let by_hand = ((1.0 + (-2.0f64).exp()).ln() + (1.0 + (-1.0f64).exp()).ln()) / 2.0;
        let l = loss(&ModelParams::new(vec![1.0], 0.0), &d).unwrap();
        assert!((l - by_hand).abs() < 1e-12);
        assert!((l - 0.220_095).abs() < 1e-5);
        let saturated = loss(&ModelParams::new(vec![1000.0], 0.0), &d).unwrap();
        assert!((0.0..=1e-11).contains(&saturated));
    }

    #[test]
    fn gradient_cases() {
        let d = ds(&[vec![1.0, 0.0]], &[true]);
        let g = gradient(&ModelParams::zeros(2), &d).unwrap();
        assert_eq!(g.weights, vec![-0.5, 0.0]);
        assert_eq!(g.bias, -0.5);
        assert!(matches!(
            gradient(&ModelParams::zeros(1), &d),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn gradient_vanishes_when_predictions_match_labels() {
        // Saturated logits make p exactly 1.0 and 0.0.
        let d = ds(&[vec![1.0], vec![-1.0]], &[true, false]);
        let m = ModelParams::new(vec![1000.0], 0.0);
        assert_eq!(predict_proba(&m, &d).unwrap(), vec![1.0, 0.0]);
        let g = gradient(&m, &d).unwrap();
        assert_eq!(g.weights, vec![0.0]);
        assert_eq!(g.bias, 0.0);
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::new(0, 1, 0.1, 0).validate().is_err());
        assert!(TrainConfig::new(1, 0, 0.1, 0).validate().is_err());
        assert!(TrainConfig::new(1, 1, 0.0f64, 0).validate().is_err());
        assert!(TrainConfig::new(1, 1, 1e-300f64, 0).validate().is_ok());
    }

    #[test]
    fn vanishing_step_leaves_params() {
        let d = ds(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.3]], &[true, false, true]);
        let start = ModelParams::new(vec![0.2, -0.1], 0.05);
        let out = client_update(&start, &d, &TrainConfig::new(3, 2, 1e-300, 9)).unwrap();
        for (a, b) in out.coords().zip(start.coords()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn full_batch_single_epoch_is_one_gradient_step() {
        let d = ds(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.3]], &[true, false, true]);
        let start = ModelParams::new(vec![0.2, -0.1], 0.05);
        let out = client_update(&start, &d, &TrainConfig::new(1, 10, 0.1, 4)).unwrap();
        let expected = start.step(&gradient(&start, &d).unwrap(), 0.1);
        for (a, b) in out.coords().zip(expected.coords()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn params_json_shape() {
        let m = ModelParams::new(vec![1.5, -2.0], 0.25);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"weights":[1.5,-2.0],"bias":0.25}"#);
        let back: ModelParams<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
