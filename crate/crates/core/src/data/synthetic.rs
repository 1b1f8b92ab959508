use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Group, TabularDataset};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Per-feature mean shift between the two label classes (±`LABEL_SHIFT`).
pub const LABEL_SHIFT: f64 = 0.2;
/// Mean shift of feature 0 between the two groups (±`GROUP_SHIFT`).
pub const GROUP_SHIFT: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dim: usize,
    /// Positive-label rates of the advantaged and disadvantaged groups.
    pub group_positive_rates: (f64, f64),
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn generate<T: Real>(&self) -> Result<TabularDataset<T>> {
        generate_synthetic(self.n, self.dim, self.group_positive_rates, self.seed)
    }
}

/// Draws a dataset whose rows alternate between groups `a` and `d`.
///
/// Labels are Bernoulli per group rate. Feature 0 is a group proxy with mean
/// `±GROUP_SHIFT` by group; every other feature has mean `±LABEL_SHIFT` by
/// label. With `dim == 1` the single feature carries both shifts. Noise is
/// standard normal.
pub fn generate_synthetic<T: Real>(
    n: usize,
    dim: usize,
    group_positive_rates: (f64, f64),
    seed: u64,
) -> Result<TabularDataset<T>> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("synthetic dataset needs n >= 2, got {n}")));
    }
    if dim == 0 {
        return Err(Error::InvalidSize("synthetic dataset needs dim >= 1".into()));
    }
    let (rate_a, rate_d) = group_positive_rates;
    for rate in [rate_a, rate_d] {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidParameter(format!("positive rate {rate} outside [0, 1]")));
        }
    }

    let mut rng = seed::rng(seed);
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let group = if i % 2 == 0 {
            Group::Advantaged
        } else {
            Group::Disadvantaged
        };
        let rate = match group {
            Group::Advantaged => rate_a,
            Group::Disadvantaged => rate_d,
        };
        let label = rng.random_bool(rate);
        let label_sign = if label { 1.0 } else { -1.0 };
        let group_sign = if group == Group::Advantaged { 1.0 } else { -1.0 };
        for j in 0..dim {
            let mut mean = 0.0;
            if j == 0 {
                mean += GROUP_SHIFT * group_sign;
            }
            if j > 0 || dim == 1 {
                mean += LABEL_SHIFT * label_sign;
            }
            let noise: f64 = rng.sample(StandardNormal);
            features.push(T::lit(mean + noise));
        }
        labels.push(label);
        groups.push(group);
    }
    TabularDataset::new(features, dim, labels, groups)
}
