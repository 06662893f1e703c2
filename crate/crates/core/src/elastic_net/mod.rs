//! Elastic Net linear regression by cyclic coordinate descent.
//!
//! Minimizes, over coefficients `β` and an unpenalized intercept `b₀`,
//!
//! ```text
//! (1/2n)·Σᵢ(yᵢ − b₀ − xᵢ·β)² + α·ρ·‖β‖₁ + (α/2)·(1 − ρ)·‖β‖₂²
//! ```
//!
//! where `ρ` is the L1 ratio. Features are z-scored on training rows; the
//! target is left in share units.

mod cv;
mod path;
mod solver;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_model::{
    apply_standardization, standardize, Dataset, DesignMatrix, FeatureVector,
    StandardizationParams,
};
use crate::error::{Error, Result};

pub use cv::{cross_validate, fold_assignment, CvConfig, CvGridPoint, CvResult, DEFAULT_FOLD_SEED, DEFAULT_L1_GRID};
pub use path::{alpha_max, alpha_path};
pub use solver::{coordinate_descent, objective, soft_threshold, CdSolution, SolverOptions};

pub const FIT_FORMAT: &str = "flipscan.fit";
pub const FIT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Overall regularization strength.
    pub alpha: f64,
    /// Share of the penalty carried by the L1 term; 1 is the lasso.
    pub l1_ratio: f64,
}

impl PenaltyConfig {
    pub fn new(alpha: f64, l1_ratio: f64) -> Result<Self> {
        let p = Self { alpha, l1_ratio };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::Config(format!("l1_ratio must be in [0, 1], got {}", self.l1_ratio)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub fold_seed: Option<u64>,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitModel {
    /// One coefficient per retained (standardized) feature.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub penalty: PenaltyConfig,
    pub standardization: StandardizationParams,
    pub meta: TrainingMeta,
}

impl FitModel {
    pub fn feature_names(&self) -> Vec<String> {
        self.standardization.retained_names()
    }

    pub fn nonzero_count(&self) -> usize {
        self.coefficients.iter().filter(|b| **b != 0.0).count()
    }

    fn predict_standardized(&self, z: &[f64]) -> f64 {
        self.intercept
            + z.iter()
                .zip(&self.coefficients)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn to_json(&self, cv: Option<&CvResult>) -> Result<String> {
        let doc = FitDocument {
            format: FIT_FORMAT.to_string(),
            version: FIT_FORMAT_VERSION,
            coefficients: self.feature_names().into_iter().zip(self.coefficients.iter().copied()).collect(),
            intercept: self.intercept,
            penalty: self.penalty,
            standardization: self.standardization.clone(),
            training: self.meta.clone(),
            cv: cv.cloned(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<(FitModel, Option<CvResult>)> {
        let doc: FitDocument =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("fit document: {e}")))?;
        if doc.format != FIT_FORMAT || doc.version != FIT_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported fit document {} v{}",
                doc.format, doc.version
            )));
        }
        let coefficients = doc
            .standardization
            .retained_names()
            .iter()
            .map(|name| {
                doc.coefficients
                    .get(name)
                    .copied()
                    .ok_or_else(|| Error::Schema(format!("missing coefficient {name}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if coefficients.len() != doc.coefficients.len() {
            return Err(Error::Schema("coefficients for unknown features".into()));
        }
        Ok((
            FitModel {
                coefficients,
                intercept: doc.intercept,
                penalty: doc.penalty,
                standardization: doc.standardization,
                meta: doc.training,
            },
            doc.cv,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct FitDocument {
    format: String,
    version: u32,
    coefficients: BTreeMap<String, f64>,
    intercept: f64,
    penalty: PenaltyConfig,
    standardization: StandardizationParams,
    training: TrainingMeta,
    #[serde(default)]
    cv: Option<CvResult>,
}

/// Fits one penalty on all rows of `dataset`.
pub fn fit(dataset: &Dataset, penalty: PenaltyConfig, solver: &SolverOptions) -> Result<FitModel> {
    let (x, params) = standardize(dataset)?;
    fit_design(&x, params, &dataset.target_shares(), penalty, solver, None)
}

fn fit_design(
    x: &DesignMatrix,
    params: StandardizationParams,
    y: &[f64],
    penalty: PenaltyConfig,
    solver: &SolverOptions,
    fold_seed: Option<u64>,
) -> Result<FitModel> {
    let sol = coordinate_descent(x, y, &penalty, solver, None, false)?;
    Ok(FitModel {
        coefficients: sol.coefficients,
        intercept: sol.intercept,
        penalty,
        standardization: params,
        meta: TrainingMeta {
            fold_seed,
            iterations: sol.iterations,
            objective: sol.objective,
            converged: sol.converged,
        },
    })
}

/// Unstandardized feature matrix of a dataset.
pub fn raw_design(dataset: &Dataset) -> Result<DesignMatrix> {
    let rows: Vec<Vec<f64>> = dataset.counties.iter().map(|c| c.features.clone()).collect();
    DesignMatrix::from_rows(dataset.feature_names.clone(), &rows)
}

/// Cross-validates `(l1_ratio, alpha)` and refits the selection on all rows.
pub fn train(dataset: &Dataset, config: &CvConfig) -> Result<(FitModel, CvResult)> {
    let raw = raw_design(dataset)?;
    let y = dataset.target_shares();
    let cv = cross_validate(&raw, &y, config)?;
    let params = StandardizationParams::fit(&dataset.feature_names, &raw)?;
    let x = params.transform(&raw)?;
    let model = fit_design(&x, params, &y, cv.selected, &config.solver, Some(config.seed))?;
    Ok((model, cv))
}

/// `b₀ + standardized(x)·β`; not clamped to [0, 1].
pub fn predict(model: &FitModel, features: &FeatureVector<'_>) -> Result<f64> {
    let z = apply_standardization(&model.standardization, features)?;
    Ok(model.predict_standardized(&z))
}

/// Predictions for every county of `dataset`.
pub fn predict_dataset(model: &FitModel, dataset: &Dataset) -> Result<Vec<f64>> {
    if dataset.feature_names != model.standardization.input_names {
        return Err(Error::Schema(
            "dataset features differ from the model's training schema".into(),
        ));
    }
    Ok(dataset
        .counties
        .iter()
        .map(|c| model.predict_standardized(&model.standardization.transform_values(&c.features)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{generate_synthetic, SyntheticSpec};

    fn small() -> Dataset {
        generate_synthetic(&SyntheticSpec::new(120, 8, 3, 0.01, 5)).unwrap().dataset
    }

    #[test]
    fn penalty_validation() {
        assert!(PenaltyConfig::new(-1.0, 0.5).is_err());
        assert!(PenaltyConfig::new(0.1, 1.5).is_err());
        assert!(PenaltyConfig::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn zero_model_predicts_intercept() {
        let ds = small();
        let mut model = fit(&ds, PenaltyConfig::new(0.01, 0.5).unwrap(), &SolverOptions::default()).unwrap();
        model.coefficients.iter_mut().for_each(|b| *b = 0.0);
        for i in 0..ds.n() {
            assert_eq!(predict(&model, &ds.features(i)).unwrap(), model.intercept);
        }
    }

    #[test]
    fn predictions_are_affine() {
        let ds = small();
        let model = fit(&ds, PenaltyConfig::new(0.001, 0.5).unwrap(), &SolverOptions::default()).unwrap();
        let a = &ds.counties[0].features;
        let b = &ds.counties[1].features;
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        let names = &ds.feature_names;
        let p = |v: &[f64]| predict(&model, &FeatureVector { names, values: v }).unwrap();
        assert!((p(&mid) - 0.5 * (p(a) + p(b))).abs() < 1e-12);
    }

    #[test]
    fn schema_mismatch() {
        let ds = small();
        let model = fit(&ds, PenaltyConfig::new(0.01, 0.5).unwrap(), &SolverOptions::default()).unwrap();
        let names: Vec<String> = (0..8).map(|j| format!("y{j}")).collect();
        let fv = FeatureVector {
            names: &names,
            values: &ds.counties[0].features,
        };
        assert!(matches!(predict(&model, &fv), Err(Error::Schema(_))));
    }

    #[test]
    fn single_grid_point_is_selected() {
        let ds = small();
        let config = CvConfig {
            l1_grid: vec![0.5],
            alphas: Some(vec![0.003]),
            ..CvConfig::default()
        };
        let (model, cv) = train(&ds, &config).unwrap();
        assert_eq!(cv.selected, PenaltyConfig::new(0.003, 0.5).unwrap());
        assert_eq!(model.penalty, cv.selected);
        assert_eq!(cv.grid.len(), 1);
        assert_eq!(cv.grid[0].fold_mse.len(), 5);
    }

    #[test]
    fn json_round_trip() {
        let ds = small();
        let config = CvConfig {
            l1_grid: vec![0.1, 1.0],
            n_alphas: 5,
            ..CvConfig::default()
        };
        let (model, cv) = train(&ds, &config).unwrap();
        let text = model.to_json(Some(&cv)).unwrap();
        let (back, cv_back) = FitModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(cv_back.unwrap(), cv);
    }
}
