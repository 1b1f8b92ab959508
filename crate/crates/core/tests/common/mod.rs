#![allow(dead_code)]

use fedval::data::{ClientProfile, Group, TabularDataset, Behavior};
use fedval::model::ModelParams;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random dataset with both groups and both labels present in each group.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> TabularDataset<f64> {
    assert!(n >= 4);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let mut groups: Vec<Group> = (0..n)
        .map(|_| if rng.random_bool(0.5) { Group::Advantaged } else { Group::Disadvantaged })
        .collect();
    // Pin one positive and one negative into each group.
    let pinned = [
        (Group::Advantaged, true),
        (Group::Advantaged, false),
        (Group::Disadvantaged, true),
        (Group::Disadvantaged, false),
    ];
    for (slot, (g, y)) in pinned.into_iter().enumerate() {
        let i = rng.random_range(0..n / 4) * 4 + slot;
        groups[i] = g;
        labels[i] = y;
    }
    TabularDataset::from_rows(&rows, labels, groups).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> ModelParams<f64> {
    ModelParams::new(
        (0..dim).map(|_| rng.random_range(-scale..scale)).collect(),
        rng.random_range(-scale..scale),
    )
}

pub fn shuffled(ds: &TabularDataset<f64>, rng: &mut ChaCha8Rng) -> TabularDataset<f64> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(rng);
    ds.select(&idx).unwrap()
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Row-by-row prediction with its own dot product.
pub fn oracle_predictions(p: &ModelParams<f64>, ds: &TabularDataset<f64>) -> Vec<bool> {
    (0..ds.len())
        .map(|i| {
            let mut z = p.bias;
            for (w, x) in p.weights.iter().zip(ds.row(i)) {
                z += w * x;
            }
            sigmoid(z) >= 0.5
        })
        .collect()
}

pub fn oracle_accuracy(pred: &[bool], ds: &TabularDataset<f64>) -> f64 {
    let mut correct = 0usize;
    for (i, &p) in pred.iter().enumerate() {
        if p == ds.label(i) {
            correct += 1;
        }
    }
    correct as f64 / ds.len() as f64
}

/// `P(Ŷ=1 | group)` by counting, optionally restricted to label-1 rows.
fn oracle_rate(pred: &[bool], ds: &TabularDataset<f64>, g: Group, positives_only: bool) -> f64 {
    let mut total = 0usize;
    let mut hit = 0usize;
    for (i, &p) in pred.iter().enumerate() {
        if ds.group(i) != g || (positives_only && !ds.label(i)) {
            continue;
        }
        total += 1;
        if p {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

pub fn oracle_spd(pred: &[bool], ds: &TabularDataset<f64>) -> f64 {
    (oracle_rate(pred, ds, Group::Advantaged, false) - oracle_rate(pred, ds, Group::Disadvantaged, false)).abs()
}

pub fn oracle_eod(pred: &[bool], ds: &TabularDataset<f64>) -> f64 {
    (oracle_rate(pred, ds, Group::Advantaged, true) - oracle_rate(pred, ds, Group::Disadvantaged, true)).abs()
}

/// Mean cross-entropy computed term by term.
pub fn oracle_loss(p: &ModelParams<f64>, ds: &TabularDataset<f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..ds.len() {
        let z: f64 = p.bias + p.weights.iter().zip(ds.row(i)).map(|(w, x)| w * x).sum::<f64>();
        let q = sigmoid(z).clamp(1e-12, 1.0 - 1e-12);
        total -= if ds.label(i) { q.ln() } else { (1.0 - q).ln() };
    }
    total / ds.len() as f64
}

pub fn cooperative_clients(shards: Vec<TabularDataset<f64>>) -> Vec<ClientProfile<f64>> {
    shards
        .into_iter()
        .enumerate()
        .map(|(id, d)| ClientProfile::new(id, Behavior::Cooperative, d))
        .collect()
}

/// Dataset with swapped group labels.
pub fn swap_groups(ds: &TabularDataset<f64>) -> TabularDataset<f64> {
    TabularDataset::new(
        ds.features().to_vec(),
        ds.dim(),
        ds.labels().to_vec(),
        ds.groups().iter().map(|g| g.other()).collect(),
    )
    .unwrap()
}

pub fn max_abs_diff(a: &ModelParams<f64>, b: &ModelParams<f64>) -> f64 {
    a.coords().zip(b.coords()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
