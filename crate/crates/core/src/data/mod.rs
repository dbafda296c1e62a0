//! Tabular dataset ingestion: CSV loading against a schema, feature
//! encoding, group/label binarization and seeded splits.

mod schema;
mod split;

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schema::{ColumnRole, DatasetSchema};
pub use split::{kfold, split, split_indices, Fold, DEFAULT_RATIOS};

/// Category used for missing categorical cells.
pub const MISSING_CATEGORY: &str = "<missing>";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("schema column `{0}` not found in CSV header")]
    SchemaMismatch(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("column `{column}` row {row}: `{value}` is not a number")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("privileged value `{0}` does not occur in the sensitive column")]
    PrivilegedValueAbsent(String),
    #[error("training row set is empty")]
    EmptyTrainRows,
    #[error("row index {0} out of range")]
    RowOutOfRange(usize),
    #[error("{rows} rows, at least {needed} needed")]
    TooFewRows { rows: usize, needed: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("invalid split ratios {0:?}")]
    InvalidRatios(Vec<f64>),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Unprivileged,
    Privileged,
}

impl Group {
    pub fn other(self) -> Group {
        match self {
            Group::Unprivileged => Group::Privileged,
            Group::Privileged => Group::Unprivileged,
        }
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// CSV contents as text. Rows with a missing label or sensitive cell have
/// already been dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Rows removed because their label or sensitive cell was missing.
    pub dropped_rows: usize,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn column(&self, idx: usize) -> impl Iterator<Item = &str> {
        self.rows.iter().map(move |r| r[idx].as_str())
    }
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<RawTable, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_dataset(file, schema)
}

pub fn read_dataset(reader: impl Read, schema: &DatasetSchema) -> Result<RawTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::MalformedCsv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    for name in schema.columns.keys() {
        if !headers.contains(name) {
            return Err(DataError::SchemaMismatch(name.clone()));
        }
    }
    let label = headers.iter().position(|h| h == schema.label_column()).unwrap();
    let sensitive = headers
        .iter()
        .position(|h| h == schema.sensitive_column())
        .unwrap();

    let mut rows = Vec::new();
    let mut dropped_rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::MalformedCsv(e.to_string()))?;
        let row: Vec<String> = record.iter().map(str::to_owned).collect();
        if is_missing(&row[label]) || is_missing(&row[sensitive]) {
            dropped_rows += 1;
            continue;
        }
        rows.push(row);
    }
    Ok(RawTable {
        headers,
        rows,
        dropped_rows,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PreprocessWarning {
    /// Numeric feature with zero variance on the training rows; dropped.
    ConstantColumn(String),
}

/// Encoded feature matrix with binary labels and group membership.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDataset {
    /// Row-major `len() x n_features()` matrix.
    pub features: Vec<f64>,
    pub n_features: usize,
    pub labels: Vec<u8>,
    pub groups: Vec<Group>,
    pub feature_names: Vec<String>,
    pub warnings: Vec<PreprocessWarning>,
}

impl EncodedDataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<u8>,
        groups: Vec<Group>,
    ) -> EncodedDataset {
        assert_eq!(labels.len(), groups.len());
        assert_eq!(features.len(), labels.len() * n_features);
        EncodedDataset {
            features,
            n_features,
            feature_names: (0..n_features).map(|i| format!("x{i}")).collect(),
            labels,
            groups,
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn subset(&self, rows: &[usize]) -> EncodedDataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        EncodedDataset {
            features,
            n_features: self.n_features,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            groups: rows.iter().map(|&r| self.groups[r]).collect(),
            feature_names: self.feature_names.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Train/validation/test partitions of one encoded dataset.
#[derive(Clone, Debug)]
pub struct SplitBundle {
    pub train: EncodedDataset,
    pub validation: EncodedDataset,
    pub test: EncodedDataset,
    pub seed: u64,
}

impl SplitBundle {
    /// Encode `raw` with statistics from `train` rows, then cut it into the
    /// three partitions.
    pub fn build(
        raw: &RawTable,
        schema: &DatasetSchema,
        train: &[usize],
        validation: &[usize],
        test: &[usize],
        seed: u64,
    ) -> Result<SplitBundle, DataError> {
        let encoded = preprocess(raw, schema, train)?;
        Ok(SplitBundle {
            train: encoded.subset(train),
            validation: encoded.subset(validation),
            test: encoded.subset(test),
            seed,
        })
    }
}

enum Encoder {
    Numeric { col: usize, mean: f64, std: f64 },
    Categorical { col: usize, categories: Vec<String> },
}

/// Encode every row of `raw`.
///
/// Numeric columns are z-scored with mean and (population) standard deviation
/// of the training rows; missing numeric cells take the training mean.
/// Categorical columns are one-hot encoded over all observed values, with
/// missing cells mapped to [`MISSING_CATEGORY`].
pub fn preprocess(
    raw: &RawTable,
    schema: &DatasetSchema,
    train_rows: &[usize],
) -> Result<EncodedDataset, DataError> {
    if train_rows.is_empty() {
        return Err(DataError::EmptyTrainRows);
    }
    if let Some(&bad) = train_rows.iter().find(|&&r| r >= raw.len()) {
        return Err(DataError::RowOutOfRange(bad));
    }
    let col_of = |name: &str| {
        raw.column_index(name)
            .ok_or_else(|| DataError::SchemaMismatch(name.to_owned()))
    };
    let label_col = col_of(schema.label_column())?;
    let sensitive_col = col_of(schema.sensitive_column())?;

    if !raw
        .column(sensitive_col)
        .any(|v| v == schema.privileged_value)
    {
        return Err(DataError::PrivilegedValueAbsent(
            schema.privileged_value.clone(),
        ));
    }

    let mut encoders = Vec::new();
    let mut names = Vec::new();
    let mut warnings = Vec::new();
    for (col, header) in raw.headers.iter().enumerate() {
        match schema.columns.get(header) {
            Some(ColumnRole::Numeric) => {
                let values = parse_numeric(raw, col, header)?;
                let observed: Vec<f64> = train_rows.iter().filter_map(|&r| values[r]).collect();
                let n = observed.len() as f64;
                let mean = if observed.is_empty() {
                    0.0
                } else {
                    observed.iter().sum::<f64>() / n
                };
                let var = if observed.is_empty() {
                    0.0
                } else {
                    observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
                };
                let std = var.sqrt();
                if std <= 1e-12 * mean.abs().max(1.0) {
                    log::warn!("numeric column `{header}` is constant on training rows; dropped");
                    warnings.push(PreprocessWarning::ConstantColumn(header.clone()));
                    continue;
                }
                encoders.push(Encoder::Numeric { col, mean, std });
                names.push(header.clone());
            }
            Some(ColumnRole::Categorical) => {
                let categories: Vec<String> = raw
                    .column(col)
                    .map(|v| if is_missing(v) { MISSING_CATEGORY } else { v })
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .map(str::to_owned)
                    .collect();
                names.extend(categories.iter().map(|c| format!("{header}={c}")));
                encoders.push(Encoder::Categorical { col, categories });
            }
            _ => {}
        }
    }

    let n_features = names.len();
    let mut features = Vec::with_capacity(raw.len() * n_features);
    for row in &raw.rows {
        for enc in &encoders {
            match enc {
                Encoder::Numeric { col, mean, std } => {
                    let cell = &row[*col];
                    let v = if is_missing(cell) {
                        *mean
                    } else {
                        // Parsed successfully above.
                        cell.parse::<f64>().unwrap()
                    };
                    features.push((v - mean) / std);
                }
                Encoder::Categorical { col, categories } => {
                    let cell = row[*col].as_str();
                    let cell = if is_missing(cell) { MISSING_CATEGORY } else { cell };
                    features.extend(categories.iter().map(|c| f64::from(u8::from(c == cell))));
                }
            }
        }
    }

    let labels = raw
        .column(label_col)
        .map(|v| u8::from(v == schema.positive_label_value))
        .collect();
    let groups = raw
        .column(sensitive_col)
        .map(|v| {
            if v == schema.privileged_value {
                Group::Privileged
            } else {
                Group::Unprivileged
            }
        })
        .collect();

    Ok(EncodedDataset {
        features,
        n_features,
        labels,
        groups,
        feature_names: names,
        warnings,
    })
}

fn parse_numeric(raw: &RawTable, col: usize, header: &str) -> Result<Vec<Option<f64>>, DataError> {
    raw.column(col)
        .enumerate()
        .map(|(row, cell)| {
            if is_missing(cell) {
                Ok(None)
            } else {
                cell.parse::<f64>()
                    .map(Some)
                    .map_err(|_| DataError::NonNumeric {
                        column: header.to_owned(),
                        row,
                        value: cell.to_owned(),
                    })
            }
        })
        .collect()
}

/// Per-group row counts, used for sanity reporting.
pub fn group_counts(groups: &[Group]) -> HashMap<Group, usize> {
    let mut counts = HashMap::new();
    for g in groups {
        *counts.entry(*g).or_insert(0) += 1;
    }
    counts
}
