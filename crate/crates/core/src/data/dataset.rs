use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sensitive-attribute group of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Advantaged,
    Disadvantaged,
}

impl Group {
    pub fn other(self) -> Group {
        match self {
            Group::Advantaged => Group::Disadvantaged,
            Group::Disadvantaged => Group::Advantaged,
        }
    }

    /// Short code used in CSV output.
    pub fn code(self) -> &'static str {
        match self {
            Group::Advantaged => "a",
            Group::Disadvantaged => "d",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Advantaged => "advantaged",
            Group::Disadvantaged => "disadvantaged",
        })
    }
}

/// Row and positive-label counts per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupStats {
    pub rows_a: usize,
    pub positives_a: usize,
    pub rows_d: usize,
    pub positives_d: usize,
}

impl GroupStats {
    pub fn rows(&self, group: Group) -> usize {
        match group {
            Group::Advantaged => self.rows_a,
            Group::Disadvantaged => self.rows_d,
        }
    }

    pub fn positives(&self, group: Group) -> usize {
        match group {
            Group::Advantaged => self.positives_a,
            Group::Disadvantaged => self.positives_d,
        }
    }

    /// Empirical positive-label rate of `group`, `None` if the group is empty.
    pub fn positive_rate(&self, group: Group) -> Option<f64> {
        let rows = self.rows(group);
        (rows > 0).then(|| self.positives(group) as f64 / rows as f64)
    }
}

/// Row-major feature matrix with per-row binary label and sensitive group.
///
/// Always holds at least one row and only finite features.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset<T> {
    features: Vec<T>,
    dim: usize,
    labels: Vec<bool>,
    groups: Vec<Group>,
}

impl<T: Real> TabularDataset<T> {
    pub fn new(features: Vec<T>, dim: usize, labels: Vec<bool>, groups: Vec<Group>) -> Result<Self> {
        let rows = labels.len();
        if rows == 0 {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 {
            return Err(Error::InvalidDataset("feature dimension must be at least 1".into()));
        }
        if groups.len() != rows {
            return Err(Error::InvalidDataset(format!(
                "{rows} labels but {} group entries",
                groups.len()
            )));
        }
        if features.len() != rows * dim {
            return Err(Error::InvalidDataset(format!(
                "{} feature values do not form {rows} rows of dimension {dim}",
                features.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            features,
            dim,
            labels,
            groups,
        })
    }

    /// Builds a dataset from per-row feature vectors.
    pub fn from_rows(rows: &[Vec<T>], labels: Vec<bool>, groups: Vec<Group>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Shape {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(rows.concat(), dim, labels, groups)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn group(&self, i: usize) -> Group {
        self.groups[i]
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn stats(&self) -> GroupStats {
        let mut stats = GroupStats::default();
        for (&label, &group) in self.labels.iter().zip(&self.groups) {
            match group {
                Group::Advantaged => {
                    stats.rows_a += 1;
                    stats.positives_a += usize::from(label);
                }
                Group::Disadvantaged => {
                    stats.rows_d += 1;
                    stats.positives_d += usize::from(label);
                }
            }
        }
        stats
    }

    /// New dataset made of the given rows, in the given order.
    ///
    /// Fails with [`Error::EmptyDataset`] when `indices` is empty.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Ok(Self {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
        })
    }

    /// Row indices sorted by (features, label, group) under a total order.
    ///
    /// Two datasets holding the same multiset of rows yield the same sequence
    /// of rows when read through their canonical orders.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&i, &j| {
            self.row(i)
                .iter()
                .zip(self.row(j))
                .map(|(a, b)| a.to_f64().unwrap_or(0.0).total_cmp(&b.to_f64().unwrap_or(0.0)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.labels[i].cmp(&self.labels[j]))
                .then(self.groups[i].cmp(&self.groups[j]))
        });
        order
    }

    /// Converts the scalar type, e.g. to run the same data in `f32`.
    pub fn cast<U: Real>(&self) -> TabularDataset<U> {
        TabularDataset {
            features: self
                .features
                .iter()
                .map(|v| U::from(*v).expect("finite feature converts"))
                .collect(),
            dim: self.dim,
            labels: self.labels.clone(),
            groups: self.groups.clone(),
        }
    }
}
