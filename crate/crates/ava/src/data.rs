//! Tabular dataset loading, preprocessing, and train/test splitting.
//!
//! A [`Table`] is the raw parse of a CSV file: string cells with missing
//! markers preserved. Fitting a [`Preprocessing`] on a training table and
//! applying it yields a [`Dataset`]: a fully numeric `d x N` feature matrix
//! (features as rows, points as columns) with class-index labels. Test data
//! is always transformed with statistics fitted on the training table.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AvaError, Result};

const MISSING_MARKERS: [&str; 5] = ["", "?", "NA", "N/A", "na"];

/// Raw CSV contents: column-major string cells, `None` marking missing values.
#[derive(Debug, Clone)]
pub struct Table {
    pub column_names: Vec<String>,
    pub columns: Vec<Vec<Option<String>>>,
    pub labels: Vec<String>,
    pub label_name: String,
    /// Row indices in the originally loaded file; preserved across splits.
    pub row_ids: Vec<usize>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    fn select_rows(&self, rows: &[usize]) -> Table {
        Table {
            column_names: self.column_names.clone(),
            columns: self
                .columns
                .iter()
                .map(|col| rows.iter().map(|&r| col[r].clone()).collect())
                .collect(),
            labels: rows.iter().map(|&r| self.labels[r].clone()).collect(),
            label_name: self.label_name.clone(),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
        }
    }
}

/// Load an RFC-4180-style CSV. With `header = false`, `label_column` is the
/// zero-based column index as a string.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, header: bool) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .from_path(path.as_ref())?;

    let column_names: Vec<String> = if header {
        reader.headers()?.iter().map(|s| s.to_string()).collect()
    } else {
        Vec::new()
    };

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let fields: Vec<String> = record.iter().map(|s| s.to_string()).collect();
        let expected = if header {
            column_names.len()
        } else if let Some(first) = rows.first() {
            first.len()
        } else {
            fields.len()
        };
        if fields.len() != expected {
            return Err(AvaError::MalformedRow {
                row: i + if header { 2 } else { 1 },
                expected,
                found: fields.len(),
            });
        }
        rows.push(fields);
    }
    if rows.is_empty() {
        return Err(AvaError::InvalidArgument("csv file has no data rows".into()));
    }

    let width = rows[0].len();
    let column_names = if header {
        column_names
    } else {
        (0..width).map(|i| format!("c{i}")).collect()
    };

    let label_idx = if header {
        column_names
            .iter()
            .position(|n| n == label_column)
            .ok_or_else(|| AvaError::UnknownLabelColumn(label_column.to_string()))?
    } else {
        label_column
            .parse::<usize>()
            .ok()
            .filter(|&i| i < width)
            .ok_or_else(|| AvaError::UnknownLabelColumn(label_column.to_string()))?
    };

    let feature_names: Vec<String> = column_names
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, n)| n.clone())
        .collect();

    let mut columns: Vec<Vec<Option<String>>> = vec![Vec::with_capacity(rows.len()); width - 1];
    let mut labels = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut fi = 0;
        for (ci, cell) in row.iter().enumerate() {
            let trimmed = cell.trim();
            if ci == label_idx {
                if MISSING_MARKERS.contains(&trimmed) {
                    return Err(AvaError::InvalidArgument(format!(
                        "missing label in column `{}`",
                        column_names[label_idx]
                    )));
                }
                labels.push(trimmed.to_string());
            } else {
                let value = if MISSING_MARKERS.contains(&trimmed) {
                    None
                } else {
                    Some(trimmed.to_string())
                };
                columns[fi].push(value);
                fi += 1;
            }
        }
    }

    Ok(Table {
        column_names: feature_names,
        columns,
        labels,
        label_name: column_names[label_idx].clone(),
        row_ids: (0..rows.len()).collect(),
    })
}

/// Names the categorical columns; everything else is treated as numeric.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub categorical_columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ColumnTransform {
    /// Standardize to mean 0, scale 1 (population std over the train split);
    /// missing values imputed with the train mean before standardizing.
    Numeric {
        name: String,
        mean: f64,
        scale: f64,
    },
    /// One indicator feature per level seen in the train split. Unseen levels
    /// and missing values map to all-zeros.
    OneHot { name: String, levels: Vec<String> },
}

/// Fitted transform record. Applying it to the table it was fitted on
/// reproduces the preprocessed training matrix exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preprocessing {
    pub transforms: Vec<ColumnTransform>,
    pub class_names: Vec<String>,
    pub warnings: Vec<String>,
}

impl Preprocessing {
    /// Fit transforms and the label encoding on a training table.
    pub fn fit(train: &Table, spec: &PreprocessSpec) -> Result<Preprocessing> {
        for name in &spec.categorical_columns {
            if !train.column_names.contains(name) {
                return Err(AvaError::Config(format!(
                    "categorical column `{name}` not present in the data"
                )));
            }
        }
        let mut warnings = Vec::new();
        let mut transforms = Vec::with_capacity(train.n_columns());
        for (name, col) in train.column_names.iter().zip(&train.columns) {
            if spec.categorical_columns.contains(name) {
                let levels: BTreeSet<String> = col.iter().flatten().cloned().collect();
                transforms.push(ColumnTransform::OneHot {
                    name: name.clone(),
                    levels: levels.into_iter().collect(),
                });
            } else {
                let values = parse_numeric(name, col)?;
                let present: Vec<f64> = values.iter().flatten().cloned().collect();
                if present.is_empty() {
                    return Err(AvaError::InvalidArgument(format!(
                        "numeric column `{name}` has no non-missing values"
                    )));
                }
                let mean = present.iter().sum::<f64>() / present.len() as f64;
                let var =
                    present.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / present.len() as f64;
                let mut scale = var.sqrt();
                if scale < 1e-12 {
                    warnings.push(format!("column `{name}` has zero variance; scale set to 1"));
                    scale = 1.0;
                }
                transforms.push(ColumnTransform::Numeric {
                    name: name.clone(),
                    mean,
                    scale,
                });
            }
        }
        let class_names: Vec<String> = train
            .labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Preprocessing {
            transforms,
            class_names,
            warnings,
        })
    }

    pub fn n_encoded_features(&self) -> usize {
        self.transforms
            .iter()
            .map(|t| match t {
                ColumnTransform::Numeric { .. } => 1,
                ColumnTransform::OneHot { levels, .. } => levels.len(),
            })
            .sum()
    }

    pub fn encoded_feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for t in &self.transforms {
            match t {
                ColumnTransform::Numeric { name, .. } => names.push(name.clone()),
                ColumnTransform::OneHot { name, levels } => {
                    names.extend(levels.iter().map(|l| format!("{name}={l}")));
                }
            }
        }
        names
    }

    /// Apply the fitted transforms to a table (train or test).
    pub fn transform(&self, table: &Table) -> Result<Dataset> {
        if table.n_columns() != self.transforms.len() {
            return Err(AvaError::DimensionMismatch {
                expected: self.transforms.len(),
                got: table.n_columns(),
            });
        }
        let n = table.n_rows();
        let d = self.n_encoded_features();
        let mut features = Array2::<f64>::zeros((d, n));
        let mut row = 0;
        for (t, col) in self.transforms.iter().zip(&table.columns) {
            match t {
                ColumnTransform::Numeric { name, mean, scale } => {
                    let values = parse_numeric(name, col)?;
                    for (j, v) in values.iter().enumerate() {
                        let v = v.unwrap_or(*mean);
                        features[(row, j)] = (v - mean) / scale;
                    }
                    row += 1;
                }
                ColumnTransform::OneHot { name, levels } => {
                    for (j, cell) in col.iter().enumerate() {
                        if let Some(level) = cell { match levels.iter().position(|l| l == level) {
                            Some(li) => features[(row + li, j)] = 1.0,
                            None => {
                                eprintln!(
                                    "warning: unseen level `{level}` in column `{name}`; encoded as all-zeros"
                                );
                            }
                        } }
                    }
                    row += levels.len();
                }
            }
        }
        let labels = table
            .labels
            .iter()
            .map(|l| {
                self.class_names
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| {
                        AvaError::InvalidArgument(format!("label `{l}` not seen during fit"))
                    })
            })
            .collect::<Result<Vec<usize>>>()?;
        Dataset::new(
            features,
            labels,
            self.encoded_feature_names(),
            self.class_names.clone(),
            Some(self.clone()),
        )
    }
}

fn parse_numeric(name: &str, col: &[Option<String>]) -> Result<Vec<Option<f64>>> {
    col.iter()
        .enumerate()
        .map(|(row, cell)| match cell {
            None => Ok(None),
            Some(s) => s.parse::<f64>().map(Some).map_err(|_| AvaError::NonNumericCell {
                column: name.to_string(),
                row,
                value: s.clone(),
            }),
        })
        .collect()
}

/// Fit on `train` and transform it in one step.
pub fn preprocess(train: &Table, spec: &PreprocessSpec) -> Result<Dataset> {
    Preprocessing::fit(train, spec)?.transform(train)
}

/// Fully numeric dataset: features are a `d x N` matrix (one column per point).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    pub preprocessing: Option<Preprocessing>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
        preprocessing: Option<Preprocessing>,
    ) -> Result<Dataset> {
        if labels.len() != features.ncols() {
            return Err(AvaError::DimensionMismatch {
                expected: features.ncols(),
                got: labels.len(),
            });
        }
        if feature_names.len() != features.nrows() {
            return Err(AvaError::DimensionMismatch {
                expected: features.nrows(),
                got: feature_names.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(AvaError::Invariant(
                "feature matrix contains non-finite entries".into(),
            ));
        }
        let unique: BTreeSet<&String> = feature_names.iter().collect();
        if unique.len() != feature_names.len() {
            return Err(AvaError::Invariant("feature names are not unique".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(AvaError::InvalidArgument(format!(
                "label index {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            class_names,
            preprocessing,
        })
    }

    pub fn n_features(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn point(&self, j: usize) -> Vec<f64> {
        self.features.column(j).to_vec()
    }

    pub fn label(&self, j: usize) -> usize {
        self.labels[j]
    }

    /// Per-feature mean over all points (the SHAP background vector).
    pub fn mean_point(&self) -> Vec<f64> {
        let n = self.n_points() as f64;
        self.features
            .rows()
            .into_iter()
            .map(|r| r.sum() / n)
            .collect()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Array2::<f64>::zeros((self.n_features(), indices.len()));
        for (dst, &src) in indices.iter().enumerate() {
            features.column_mut(dst).assign(&self.features.column(src));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            preprocessing: self.preprocessing.clone(),
        }
    }

    /// Dataset with training point `j` removed (leave-one-out oracles).
    pub fn without_point(&self, j: usize) -> Dataset {
        let keep: Vec<usize> = (0..self.n_points()).filter(|&i| i != j).collect();
        self.select(&keep)
    }
}

/// Disjoint train/test partition with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct Split<T> {
    pub train: T,
    pub test: T,
    pub seed: u64,
    pub test_fraction: f64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Deterministic shuffled partition of `0..n`; test side gets
/// `round(test_fraction * n)` elements.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(AvaError::InvalidArgument(format!(
            "test_fraction must lie in (0,1), got {test_fraction}"
        )));
    }
    if n < 2 {
        return Err(AvaError::InvalidArgument(
            "need at least 2 points to split".into(),
        ));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(AvaError::InvalidArgument(format!(
            "degenerate split: {n_test} test of {n} total"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn split_table(table: &Table, test_fraction: f64, seed: u64) -> Result<Split<Table>> {
    let (train_indices, test_indices) = split_indices(table.n_rows(), test_fraction, seed)?;
    Ok(Split {
        train: table.select_rows(&train_indices),
        test: table.select_rows(&test_indices),
        seed,
        test_fraction,
        train_indices,
        test_indices,
    })
}

pub fn split_dataset(data: &Dataset, test_fraction: f64, seed: u64) -> Result<Split<Dataset>> {
    let (train_indices, test_indices) = split_indices(data.n_points(), test_fraction, seed)?;
    Ok(Split {
        train: data.select(&train_indices),
        test: data.select(&test_indices),
        seed,
        test_fraction,
        train_indices,
        test_indices,
    })
}

/// Synthetic datasets used by examples and the evaluation harness.
pub mod synthetic {
    use super::Dataset;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random::<f64>();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Isotropic Gaussian blobs, one per center.
    pub fn gaussian_blobs(
        n_per_class: usize,
        centers: &[Vec<f64>],
        std: f64,
        seed: u64,
    ) -> Dataset {
        let d = centers[0].len();
        let n = n_per_class * centers.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Array2::<f64>::zeros((d, n));
        let mut labels = Vec::with_capacity(n);
        for (c, center) in centers.iter().enumerate() {
            for j in 0..n_per_class {
                let col = c * n_per_class + j;
                for i in 0..d {
                    features[(i, col)] = center[i] + std * normal(&mut rng);
                }
                labels.push(c);
            }
        }
        Dataset::new(
            features,
            labels,
            (0..d).map(|i| format!("f{i}")).collect(),
            (0..centers.len()).map(|c| format!("class{c}")).collect(),
            None,
        )
        .unwrap()
    }

    /// The four XOR corner points.
    pub fn xor() -> Dataset {
        let features =
            Array2::from_shape_vec((2, 4), vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        Dataset::new(
            features,
            vec![0, 1, 1, 0],
            vec!["x0".into(), "x1".into()],
            vec!["off".into(), "on".into()],
            None,
        )
        .unwrap()
    }

    /// Binary classification where only `informative` features carry signal;
    /// the rest are pure noise. Labels come from a linear threshold on the
    /// informative coordinates.
    pub fn informative(n: usize, d: usize, informative: &[usize], seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Array2::<f64>::zeros((d, n));
        let mut labels = Vec::with_capacity(n);
        let weights: Vec<f64> = (0..informative.len())
            .map(|i| 1.5 + 0.5 * i as f64)
            .collect();
        for j in 0..n {
            for i in 0..d {
                features[(i, j)] = normal(&mut rng);
            }
            let score: f64 = informative
                .iter()
                .zip(&weights)
                .map(|(&i, w)| w * features[(i, j)])
                .sum::<f64>()
                + 0.3 * normal(&mut rng);
            labels.push(usize::from(score > 0.0));
        }
        Dataset::new(
            features,
            labels,
            (0..d).map(|i| format!("f{i}")).collect(),
            vec!["neg".into(), "pos".into()],
            None,
        )
        .unwrap()
    }
}
