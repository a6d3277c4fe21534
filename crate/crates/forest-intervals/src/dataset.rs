use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kahan::KahanSum;

/// A fully materialized regression dataset: a row-major feature matrix plus a
/// target vector. Every value is finite; this is checked on construction so
/// downstream code never has to re-validate.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    targets: Vec<f64>,
    column_names: Vec<String>,
    n_rows: usize,
    n_cols: usize,
}

impl Dataset {
    /// Builds a dataset from feature rows, targets, and feature column names.
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n_rows = rows.len();
        let n_cols = rows[0].len();
        if n_cols == 0 {
            return Err(Error::InvalidConfig("dataset has no feature columns".into()));
        }
        if targets.len() != n_rows {
            return Err(Error::InvalidConfig(format!(
                "{} feature rows but {} targets",
                n_rows,
                targets.len()
            )));
        }
        if column_names.len() != n_cols {
            return Err(Error::InvalidConfig(format!(
                "{} feature columns but {} column names",
                n_cols,
                column_names.len()
            )));
        }
        let mut features = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::RaggedRow {
                    row: i,
                    got: row.len(),
                    expected: n_cols,
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        row: i,
                        column: column_names[j].clone(),
                    });
                }
                features.push(v);
            }
            if !targets[i].is_finite() {
                return Err(Error::NonFiniteValue {
                    row: i,
                    column: "<target>".into(),
                });
            }
        }
        Ok(Self {
            features,
            targets,
            column_names,
            n_rows,
            n_cols,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * self.n_cols;
        &self.features[start..start + self.n_cols]
    }

    pub fn feature(&self, row: usize, col: usize) -> f64 {
        self.features[row * self.n_cols + col]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Returns a new dataset containing the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_cols);
        let mut targets = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            targets.push(self.targets[r]);
        }
        Dataset {
            features,
            targets,
            column_names: self.column_names.clone(),
            n_rows: rows.len(),
            n_cols: self.n_cols,
        }
    }

    /// Replaces the target vector, keeping features. Lengths must match.
    pub(crate) fn with_targets(&self, targets: Vec<f64>) -> Dataset {
        assert_eq!(targets.len(), self.n_rows);
        Dataset {
            features: self.features.clone(),
            targets,
            column_names: self.column_names.clone(),
            n_rows: self.n_rows,
            n_cols: self.n_cols,
        }
    }
}

/// Loads a CSV file with a header row, pulling `target_column` out as the
/// regression target and keeping every other column as a feature.
///
/// Cells must parse as finite floating point numbers. At least two data rows
/// are required, since a single observation supports neither a split nor a
/// target standardization.
pub fn load_csv<P: AsRef<Path>>(path: P, target_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingTargetColumn(target_column.to_string()))?;

    let column_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if column_names.is_empty() {
        return Err(Error::InvalidConfig(
            "csv has no feature columns besides the target".into(),
        ));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                row: row_idx,
                got: record.len(),
                expected: headers.len(),
            });
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (col_idx, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|e| Error::CsvCell {
                row: row_idx,
                column: headers[col_idx].clone(),
                message: format!("{e}: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: row_idx,
                    column: headers[col_idx].clone(),
                });
            }
            if col_idx == target_idx {
                targets.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::TooFewRows {
            n: rows.len(),
            min: 2,
        });
    }
    Dataset::new(rows, targets, column_names)
}

/// Splits a dataset into train and test parts using a seeded Fisher-Yates
/// permutation of the row indices. The first `floor(n * test_fraction)`
/// entries of the permutation become the test set; the rest, in permutation
/// order, become the training set. The same seed always yields the same
/// split.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidTestFraction(test_fraction));
    }
    let n = data.n_rows();
    let n_test = (n as f64 * test_fraction).floor() as usize;
    // The training side must keep at least two rows so its targets can still
    // be standardized.
    if n_test == 0 || n - n_test < 2 {
        return Err(Error::DegenerateSplit {
            n,
            fraction: test_fraction,
        });
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    let test = data.select(&indices[..n_test]);
    let train = data.select(&indices[n_test..]);
    Ok((train, test))
}

/// Location and scale of a target vector, used to map between raw and
/// standardized target units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: f64,
    pub std: f64,
}

impl StandardizationParams {
    /// Parameters that leave values unchanged.
    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn unstandardize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Centers and scales the targets to mean zero and unit population standard
/// deviation, returning the transformed dataset together with the parameters
/// needed to map further values in either direction.
pub fn standardize_targets(data: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    let targets = data.targets();
    let n = targets.len() as f64;
    let mut sum = KahanSum::new();
    for &y in targets {
        sum.add(y);
    }
    let mean = sum.value() / n;
    let mut sq = KahanSum::new();
    for &y in targets {
        let d = y - mean;
        sq.add(d * d);
    }
    let std = (sq.value() / n).sqrt();
    if !(std > 0.0) {
        return Err(Error::ConstantTargets);
    }
    let params = StandardizationParams { mean, std };
    let standardized = targets.iter().map(|&y| params.standardize(y)).collect();
    Ok((data.with_targets(standardized), params))
}
