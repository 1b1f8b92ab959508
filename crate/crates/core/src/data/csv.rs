//! CSV ingestion with schema-driven one-hot expansion and z-score
//! standardization, and the CSV writer used for generated datasets.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Group, TabularDataset};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl FeatureColumn {
    pub fn numeric(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            kind: ColumnKind::Categorical {
                categories: categories.iter().map(|c| (*c).to_owned()).collect(),
            },
        }
    }

    fn width(&self) -> usize {
        match &self.kind {
            ColumnKind::Numeric => 1,
            ColumnKind::Categorical { categories } => categories.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelColumn {
    pub column: String,
    /// Cell value mapped to label 1; every other value maps to 0.
    pub positive: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveColumn {
    pub column: String,
    /// Cell value of the advantaged group; every other value is disadvantaged.
    pub advantaged: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub features: Vec<FeatureColumn>,
    pub label: LabelColumn,
    pub sensitive: SensitiveColumn,
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        let schema_err = |column: &str, reason: &str| Error::Schema {
            column: column.to_owned(),
            reason: reason.to_owned(),
        };
        if self.label.column == self.sensitive.column {
            return Err(schema_err(
                &self.label.column,
                "is used as both label and sensitive column",
            ));
        }
        if self.features.is_empty() {
            return Err(schema_err("<features>", "list is empty"));
        }
        let mut seen = HashSet::new();
        for col in &self.features {
            if col.name == self.label.column || col.name == self.sensitive.column {
                return Err(schema_err(&col.name, "cannot be both a feature and label/sensitive"));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(schema_err(&col.name, "is declared twice"));
            }
            if let ColumnKind::Categorical { categories } = &col.kind {
                if categories.is_empty() {
                    return Err(schema_err(&col.name, "declares an empty category vocabulary"));
                }
                let unique: HashSet<_> = categories.iter().collect();
                if unique.len() != categories.len() {
                    return Err(schema_err(&col.name, "declares duplicate categories"));
                }
            }
        }
        Ok(())
    }

    /// Width of the expanded feature vector.
    pub fn dim(&self) -> usize {
        self.features.iter().map(FeatureColumn::width).sum()
    }

    /// Names of the expanded feature columns (`col=value` for one-hot slots).
    pub fn feature_names(&self) -> Vec<String> {
        self.features
            .iter()
            .flat_map(|col| match &col.kind {
                ColumnKind::Numeric => vec![col.name.clone()],
                ColumnKind::Categorical { categories } => categories
                    .iter()
                    .map(|c| format!("{}={c}", col.name))
                    .collect(),
            })
            .collect()
    }

    /// Schema of the files written by [`write_csv`]: numeric `x0..x{dim-1}`,
    /// `label` with positive value `1`, `group` with advantaged value `a`.
    pub fn synthetic(dim: usize) -> Self {
        Self {
            features: (0..dim).map(|j| FeatureColumn::numeric(&format!("x{j}"))).collect(),
            label: LabelColumn {
                column: "label".into(),
                positive: "1".into(),
            },
            sensitive: SensitiveColumn {
                column: "group".into(),
                advantaged: "a".into(),
            },
        }
    }

    /// The UCI Adult census schema: income above 50K is the positive label,
    /// `sex` is the sensitive attribute with `Male` advantaged.
    pub fn adult() -> Self {
        Self {
            features: vec![
                FeatureColumn::numeric("age"),
                FeatureColumn::categorical(
                    "workclass",
                    &[
                        "Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
                        "State-gov", "Without-pay", "Never-worked", "?",
                    ],
                ),
                FeatureColumn::numeric("fnlwgt"),
                FeatureColumn::categorical(
                    "education",
                    &[
                        "Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
                        "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th",
                        "Doctorate", "5th-6th", "Preschool",
                    ],
                ),
                FeatureColumn::numeric("education-num"),
                FeatureColumn::categorical(
                    "marital-status",
                    &[
                        "Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
                        "Married-spouse-absent", "Married-AF-spouse",
                    ],
                ),
                FeatureColumn::categorical(
                    "occupation",
                    &[
                        "Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
                        "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
                        "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
                        "Armed-Forces", "?",
                    ],
                ),
                FeatureColumn::categorical(
                    "relationship",
                    &["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"],
                ),
                FeatureColumn::categorical(
                    "race",
                    &["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"],
                ),
                FeatureColumn::numeric("capital-gain"),
                FeatureColumn::numeric("capital-loss"),
                FeatureColumn::numeric("hours-per-week"),
                FeatureColumn::categorical(
                    "native-country",
                    &[
                        "United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
                        "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China",
                        "Cuba", "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica",
                        "Vietnam", "Mexico", "Portugal", "Ireland", "France", "Dominican-Republic",
                        "Laos", "Ecuador", "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala",
                        "Nicaragua", "Scotland", "Thailand", "Yugoslavia", "El-Salvador",
                        "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands", "?",
                    ],
                ),
            ],
            label: LabelColumn {
                column: "income".into(),
                positive: ">50K".into(),
            },
            sensitive: SensitiveColumn {
                column: "sex".into(),
                advantaged: "Male".into(),
            },
        }
    }
}

pub fn load_csv<T: Real>(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<TabularDataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses CSV text per `schema`.
///
/// Cells are trimmed. Row indices in errors count data rows from 0.
pub fn read_csv<T: Real, R: Read>(reader: R, schema: &DatasetSchema) -> Result<TabularDataset<T>> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index_of = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            column: name.to_owned(),
            reason: "is missing from the CSV header".to_owned(),
        })
    };
    let feature_idx = schema
        .features
        .iter()
        .map(|c| index_of(&c.name))
        .collect::<Result<Vec<_>>>()?;
    let label_idx = index_of(&schema.label.column)?;
    let sensitive_idx = index_of(&schema.sensitive.column)?;

    let dim = schema.dim();
    let mut raw: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |idx: usize, column: &str| -> Result<&str> {
            match record.get(idx) {
                Some(v) if !v.is_empty() => Ok(v),
                other => Err(Error::Parse {
                    row,
                    column: column.to_owned(),
                    value: other.unwrap_or("").to_owned(),
                    reason: "missing value".to_owned(),
                }),
            }
        };
        for (col, &idx) in schema.features.iter().zip(&feature_idx) {
            let value = cell(idx, &col.name)?;
            match &col.kind {
                ColumnKind::Numeric => {
                    let parsed = value.parse::<f64>().ok().filter(|v| v.is_finite());
                    raw.push(parsed.ok_or_else(|| Error::Parse {
                        row,
                        column: col.name.clone(),
                        value: value.to_owned(),
                        reason: "not a finite number".to_owned(),
                    })?);
                }
                ColumnKind::Categorical { categories } => {
                    let hit = categories.iter().position(|c| c == value).ok_or_else(|| Error::Parse {
                        row,
                        column: col.name.clone(),
                        value: value.to_owned(),
                        reason: "not in the declared category vocabulary".to_owned(),
                    })?;
                    raw.extend((0..categories.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
                }
            }
        }
        labels.push(cell(label_idx, &schema.label.column)? == schema.label.positive);
        groups.push(if cell(sensitive_idx, &schema.sensitive.column)? == schema.sensitive.advantaged {
            Group::Advantaged
        } else {
            Group::Disadvantaged
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let rows = labels.len();
    let mut offset = 0;
    for col in &schema.features {
        if col.kind == ColumnKind::Numeric {
            standardize_column(&mut raw, rows, dim, offset);
        }
        offset += col.width();
    }
    let features = raw
        .into_iter()
        .map(|v| T::from_f64(v).filter(|x| x.is_finite()))
        .collect::<Option<Vec<T>>>()
        .ok_or_else(|| Error::InvalidDataset("standardized value overflows the scalar type".into()))?;
    TabularDataset::new(features, dim, labels, groups)
}

/// In-place z-score over the whole column; zero-variance columns become zeros.
fn standardize_column(values: &mut [f64], rows: usize, dim: usize, col: usize) {
    let n = rows as f64;
    let mean = (0..rows).map(|r| values[r * dim + col]).sum::<f64>() / n;
    let var = (0..rows).map(|r| (values[r * dim + col] - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let zero_variance = std <= 1e-12 * mean.abs().max(1.0);
    for r in 0..rows {
        let v = &mut values[r * dim + col];
        *v = if zero_variance { 0.0 } else { (*v - mean) / std };
    }
}

/// Writes `dataset` with header `x0..x{dim-1},label,group` (see
/// [`DatasetSchema::synthetic`]).
pub fn write_csv<T: Real, W: Write>(dataset: &TabularDataset<T>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..dataset.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    header.push("group".into());
    wtr.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut record: Vec<String> = dataset.row(i).iter().map(|v| v.to_string()).collect();
        record.push(if dataset.label(i) { "1" } else { "0" }.into());
        record.push(dataset.group(i).code().into());
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
