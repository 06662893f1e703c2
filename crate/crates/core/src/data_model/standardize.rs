use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureVector};
use crate::error::{Error, Result};

/// Column-major matrix of standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Schema(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::Schema("ragged design matrix".into()));
        }
        Ok(Self {
            n_rows,
            names,
            columns,
        })
    }

    /// Builds a matrix from row-major data.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Schema("row length does not match names".into()));
        }
        let columns = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Ok(Self {
            n_rows: rows.len(),
            names,
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> DesignMatrix {
        DesignMatrix {
            n_rows: indices.len(),
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| indices.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    /// Columns at `indices`, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> DesignMatrix {
        DesignMatrix {
            n_rows: self.n_rows,
            names: indices.iter().map(|&j| self.names[j].clone()).collect(),
            columns: indices.iter().map(|&j| self.columns[j].clone()).collect(),
        }
    }
}

/// Per-feature centering and scaling learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    /// Full feature schema the params were learned on.
    pub input_names: Vec<String>,
    /// Indices into `input_names` of the retained features.
    pub retained: Vec<usize>,
    pub means: Vec<f64>,
    /// Population standard deviations, all strictly positive.
    pub scales: Vec<f64>,
    /// Features dropped for zero variance.
    pub dropped: Vec<String>,
}

impl StandardizationParams {
    /// Learns params from raw (unstandardized) columns.
    pub fn fit(input_names: &[String], raw: &DesignMatrix) -> Result<Self> {
        let n = raw.n_rows();
        if n == 0 {
            return Err(Error::Config("cannot standardize zero rows".into()));
        }
        let mut retained = Vec::new();
        let mut means = Vec::new();
        let mut scales = Vec::new();
        let mut dropped = Vec::new();
        for (j, name) in input_names.iter().enumerate() {
            let col = raw.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let scale = var.sqrt();
            // Constant columns of non-representable values leave rounding residue.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(scale > 1e-12 * mean.abs()) {
                dropped.push(name.clone());
                continue;
            }
            retained.push(j);
            means.push(mean);
            scales.push(scale);
        }
        if retained.is_empty() {
            return Err(Error::AllZeroVariance);
        }
        Ok(Self {
            input_names: input_names.to_vec(),
            retained,
            means,
            scales,
            dropped,
        })
    }

    pub fn retained_names(&self) -> Vec<String> {
        self.retained
            .iter()
            .map(|&j| self.input_names[j].clone())
            .collect()
    }

    #[inline]
    fn scale_value(&self, k: usize, x: f64) -> f64 {
        (x - self.means[k]) / self.scales[k]
    }

    /// Standardizes raw columns laid out on `input_names`.
    pub fn transform(&self, raw: &DesignMatrix) -> Result<DesignMatrix> {
        if raw.names() != self.input_names.as_slice() {
            return Err(Error::Schema(
                "feature names differ from the standardization schema".into(),
            ));
        }
        let columns = self
            .retained
            .iter()
            .enumerate()
            .map(|(k, &j)| raw.column(j).iter().map(|&x| self.scale_value(k, x)).collect())
            .collect();
        DesignMatrix::from_columns(self.retained_names(), columns)
    }

    /// Standardizes one row given in `input_names` order without a name check.
    pub(crate) fn transform_values(&self, values: &[f64]) -> Vec<f64> {
        self.retained
            .iter()
            .enumerate()
            .map(|(k, &j)| self.scale_value(k, values[j]))
            .collect()
    }
}

fn raw_matrix(dataset: &Dataset) -> Result<DesignMatrix> {
    let rows: Vec<Vec<f64>> = dataset.counties.iter().map(|c| c.features.clone()).collect();
    DesignMatrix::from_rows(dataset.feature_names.clone(), &rows)
}

/// Z-scores every feature of `dataset` with population statistics, dropping
/// zero-variance columns (listed in `StandardizationParams::dropped`).
pub fn standardize(dataset: &Dataset) -> Result<(DesignMatrix, StandardizationParams)> {
    if dataset.is_empty() {
        return Err(Error::Config("cannot standardize an empty dataset".into()));
    }
    let raw = raw_matrix(dataset)?;
    let params = StandardizationParams::fit(&dataset.feature_names, &raw)?;
    let design = params.transform(&raw)?;
    Ok((design, params))
}

/// Applies training-set params to one feature vector.
pub fn apply_standardization(
    params: &StandardizationParams,
    features: &FeatureVector<'_>,
) -> Result<Vec<f64>> {
    if features.names != params.input_names.as_slice() {
        return Err(Error::Schema(
            "feature names differ from the standardization schema".into(),
        ));
    }
    if features.values.len() != features.names.len() {
        return Err(Error::Schema("feature vector length mismatch".into()));
    }
    Ok(params.transform_values(features.values))
}
