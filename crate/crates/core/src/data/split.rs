use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Group, TabularDataset};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::{self, derive_seed, stream};

/// Attempts made by [`split_validation`] before giving up on coverage.
pub const VALIDATION_RETRIES: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Behavior {
    Cooperative,
    Normal,
    Uncooperative,
}

/// Subsampling recipe that lowers (or raises) one group's positive rate
/// relative to the other's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewSpec {
    /// Group whose positive rate is adjusted.
    #[serde(default = "default_target")]
    pub target: Group,
    /// Target-group positive rate divided by the other group's, in (0, 1].
    pub ratio: f64,
    /// Fraction of rows kept before the rate adjustment, in (0, 1].
    #[serde(default = "default_retain")]
    pub retain: f64,
}

fn default_target() -> Group {
    Group::Disadvantaged
}

fn default_retain() -> f64 {
    1.0
}

impl SkewSpec {
    pub fn new(ratio: f64) -> Self {
        Self {
            target: Group::Disadvantaged,
            ratio,
            retain: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!("skew ratio {} outside (0, 1]", self.ratio)));
        }
        if !(self.retain > 0.0 && self.retain <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "skew retain fraction {} outside (0, 1]",
                self.retain
            )));
        }
        Ok(())
    }
}

/// How a client's shard is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientSpec {
    pub behavior: Behavior,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew: Option<SkewSpec>,
}

impl ClientSpec {
    pub fn cooperative() -> Self {
        Self {
            behavior: Behavior::Cooperative,
            skew: None,
        }
    }

    pub fn uncooperative(skew: SkewSpec) -> Self {
        Self {
            behavior: Behavior::Uncooperative,
            skew: Some(skew),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientProfile<T> {
    pub id: usize,
    pub behavior: Behavior,
    pub data: TabularDataset<T>,
    /// Key mixed into the client's local-training seeds. Defaults to `id`;
    /// two clients with equal keys draw identical shuffles.
    pub rng_stream: u64,
}

impl<T: Real> ClientProfile<T> {
    pub fn new(id: usize, behavior: Behavior, data: TabularDataset<T>) -> Self {
        Self {
            id,
            behavior,
            data,
            rng_stream: id as u64,
        }
    }

    /// Local example count `n_k`.
    pub fn n(&self) -> usize {
        self.data.len()
    }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    order
}

/// Subsamples `dataset` so that the target group's positive rate is
/// `spec.ratio` times the other group's.
///
/// Only rows of the target group are dropped: positives when its rate must
/// fall, negatives when it must rise. Kept rows retain their input order.
pub fn skew<T: Real>(dataset: &TabularDataset<T>, spec: &SkewSpec, seed: u64) -> Result<TabularDataset<T>> {
    spec.validate()?;
    let infeasible = |reason: String, achievable: f64| Error::InfeasibleSkew { reason, achievable };
    let target = spec.target;
    let other = target.other();

    let mut kept: Vec<usize> = if spec.retain < 1.0 {
        let keep = ((spec.retain * dataset.len() as f64).round() as usize).max(1);
        let mut rows = shuffled(dataset.len(), derive_seed(seed, &[stream::RETRY]));
        rows.truncate(keep);
        rows.sort_unstable();
        rows
    } else {
        (0..dataset.len()).collect()
    };

    let rows_of = |g: Group, label: bool, from: &[usize]| -> Vec<usize> {
        from.iter()
            .copied()
            .filter(|&i| dataset.group(i) == g && dataset.label(i) == label)
            .collect()
    };
    let other_pos = rows_of(other, true, &kept).len();
    let other_rows = other_pos + rows_of(other, false, &kept).len();
    let target_pos = rows_of(target, true, &kept);
    let target_neg = rows_of(target, false, &kept);
    let target_rows = target_pos.len() + target_neg.len();
    if target_rows == 0 {
        return Err(infeasible(format!("no {target} rows available"), 0.0));
    }
    if other_rows == 0 {
        return Err(infeasible(format!("no {other} rows available"), 0.0));
    }

    let other_rate = other_pos as f64 / other_rows as f64;
    let current_rate = target_pos.len() as f64 / target_rows as f64;
    let desired = spec.ratio * other_rate;
    let mut rng = seed::rng(seed);
    // Shuffles `pool` and returns everything past the first `keep` entries.
    let drop_from = |pool: &[usize], keep: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<usize> {
        let mut pool = pool.to_vec();
        pool.shuffle(rng);
        pool.split_off(keep.min(pool.len()))
    };

    let dropped: Vec<usize> = if desired < current_rate {
        if target_neg.is_empty() {
            return Err(infeasible(
                format!("{target} group has no negative rows, its positive rate cannot be lowered"),
                if other_rate > 0.0 { current_rate / other_rate } else { 0.0 },
            ));
        }
        let keep = (desired * target_neg.len() as f64 / (1.0 - desired)).round() as usize;
        drop_from(&target_pos, keep, &mut rng)
    } else if desired > current_rate {
        if target_pos.is_empty() {
            return Err(infeasible(
                format!("{target} group has no positive rows, its positive rate cannot be raised"),
                0.0,
            ));
        }
        let keep = (target_pos.len() as f64 * (1.0 - desired) / desired).round() as usize;
        drop_from(&target_neg, keep, &mut rng)
    } else {
        Vec::new()
    };

    if !dropped.is_empty() {
        let dropped: std::collections::HashSet<usize> = dropped.into_iter().collect();
        kept.retain(|i| !dropped.contains(i));
    }
    dataset.select(&kept)
}

/// Shuffles rows and deals them into one near-equal shard per profile, then
/// skews the shards whose profile asks for it.
///
/// Remainder rows go to the lowest-indexed shards. Client ids are profile
/// positions.
pub fn partition<T: Real>(
    dataset: &TabularDataset<T>,
    profiles: &[ClientSpec],
    seed: u64,
) -> Result<Vec<ClientProfile<T>>> {
    let k = profiles.len();
    if k == 0 {
        return Err(Error::InvalidPartition("no client profiles".into()));
    }
    if dataset.len() < k {
        return Err(Error::InvalidPartition(format!(
            "{k} profiles but only {} rows",
            dataset.len()
        )));
    }
    let order = shuffled(dataset.len(), seed);
    let base = dataset.len() / k;
    let extra = dataset.len() % k;
    let mut start = 0;
    let mut clients = Vec::with_capacity(k);
    for (id, spec) in profiles.iter().enumerate() {
        let size = base + usize::from(id < extra);
        let shard = dataset.select(&order[start..start + size])?;
        start += size;
        let data = match &spec.skew {
            Some(skew_spec) => skew(&shard, skew_spec, derive_seed(seed, &[stream::SKEW, id as u64]))?,
            None => shard,
        };
        clients.push(ClientProfile::new(id, spec.behavior, data));
    }
    Ok(clients)
}

/// Splits off `fraction` of the rows as a validation set.
///
/// The validation side must contain both groups, both labels and a positive
/// row in each group; up to [`VALIDATION_RETRIES`] reseeded shuffles are
/// tried. Both sides keep input row order.
pub fn split_validation<T: Real>(
    dataset: &TabularDataset<T>,
    fraction: f64,
    seed: u64,
) -> Result<(TabularDataset<T>, TabularDataset<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidValidationSplit(format!("fraction {fraction} outside (0, 1)")));
    }
    let n = dataset.len();
    let n_val = (fraction * n as f64).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::InvalidValidationSplit(format!(
            "fraction {fraction} of {n} rows leaves an empty side"
        )));
    }
    for attempt in 0..VALIDATION_RETRIES {
        let order = shuffled(n, derive_seed(seed, &[stream::RETRY, attempt]));
        let mut val_idx = order[..n_val].to_vec();
        val_idx.sort_unstable();
        let validation = dataset.select(&val_idx)?;
        let s = validation.stats();
        let covered = s.positives_a > 0
            && s.positives_d > 0
            && s.positives_a + s.positives_d < validation.len();
        if covered {
            let mut train_idx = order[n_val..].to_vec();
            train_idx.sort_unstable();
            return Ok((dataset.select(&train_idx)?, validation));
        }
    }
    Err(Error::InvalidValidationSplit(format!(
        "no shuffle in {VALIDATION_RETRIES} attempts put both groups, both labels and \
         per-group positives into the validation side"
    )))
}
