use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::anomaly::{
    rank_anomalies, residuals, score_residuals, Analytic, AnomalyScore, ClippedGaussian, GlobalSignificance,
    ResidualSet, WidthEstimator, WidthFit,
};
use crate::data_model::Dataset;
use crate::elastic_net::{train, CvConfig, CvResult, FitModel};
use crate::error::{Error, Result};

/// Trusted training states and questioned evaluation states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlindSpec {
    pub train_states: BTreeSet<String>,
    pub eval_states: BTreeSet<String>,
    #[serde(default)]
    pub cv: CvConfig,
}

impl BlindSpec {
    pub fn new<S: AsRef<str>>(
        train_states: impl IntoIterator<Item = S>,
        eval_states: impl IntoIterator<Item = S>,
        cv: CvConfig,
    ) -> Result<Self> {
        let norm = |s: S| s.as_ref().trim().to_ascii_uppercase();
        let spec = Self {
            train_states: train_states.into_iter().map(norm).collect(),
            eval_states: eval_states.into_iter().map(norm).collect(),
            cv,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_states.is_empty() || self.eval_states.is_empty() {
            return Err(Error::Config("train and eval state lists must be non-empty".into()));
        }
        let overlap: Vec<&str> = self
            .train_states
            .intersection(&self.eval_states)
            .map(String::as_str)
            .collect();
        if !overlap.is_empty() {
            return Err(Error::Config(format!(
                "states in both train and eval lists: {}",
                overlap.join(", ")
            )));
        }
        Ok(())
    }

    pub fn is_eval(&self, state: &str) -> bool {
        self.eval_states.contains(state)
    }

    pub fn split(&self, dataset: &Dataset) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let train = dataset.filter(|c| self.train_states.contains(&c.key.state));
        let eval = dataset.filter(|c| self.eval_states.contains(&c.key.state));
        for (label, states, part) in [("train", &self.train_states, &train), ("eval", &self.eval_states, &eval)] {
            if part.is_empty() {
                return Err(Error::Config(format!("no {label} counties in the dataset")));
            }
            let present = part.states();
            for s in states.iter().filter(|s| !present.contains(s.as_str())) {
                log::warn!("{label} state {s} has no counties in the dataset");
            }
        }
        Ok((train, eval))
    }
}

/// Width estimator and look-elsewhere strategy used for scoring.
#[derive(Clone, Copy)]
pub struct Scoring<'a> {
    pub width: &'a dyn WidthEstimator,
    pub significance: &'a dyn GlobalSignificance,
}

static DEFAULT_WIDTH: ClippedGaussian = ClippedGaussian {
    clip_sigma: 3.0,
    max_iterations: 10,
};

impl Scoring<'static> {
    /// Clipped-Gaussian width with the closed-form correction.
    pub fn analytic() -> Self {
        Self {
            width: &DEFAULT_WIDTH,
            significance: &Analytic,
        }
    }
}

impl<'a> Scoring<'a> {
    pub fn with_significance(significance: &'a dyn GlobalSignificance) -> Self {
        Self {
            width: &DEFAULT_WIDTH,
            significance,
        }
    }
}

impl std::fmt::Debug for Scoring<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scoring")
            .field("width", &self.width.name())
            .field("significance", &self.significance.name())
            .finish()
    }
}

/// Residuals, width and ranked scores for one scored set of counties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub residuals: ResidualSet,
    pub width: WidthFit,
    /// Ranked by |local σ|.
    pub scores: Vec<AnomalyScore>,
}

impl Evaluation {
    pub fn rms(&self) -> f64 {
        self.residuals.rms()
    }

    /// 1-based rank and score of `fips`.
    pub fn find(&self, fips: &str) -> Option<(usize, &AnomalyScore)> {
        self.scores
            .iter()
            .enumerate()
            .find(|(_, s)| s.key.fips == fips)
            .map(|(i, s)| (i + 1, s))
    }
}

/// Scores `dataset` against `model`, fitting the width on these residuals
/// and taking the county count as the look-elsewhere trial count.
pub fn evaluate(model: &FitModel, dataset: &Dataset, scoring: Scoring<'_>) -> Result<Evaluation> {
    let residuals = residuals(model, dataset)?;
    let width = scoring.width.fit(&residuals.residuals)?;
    let scores = rank_anomalies(score_residuals(&residuals, &width, scoring.significance)?, None);
    Ok(Evaluation {
        residuals,
        width,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlindFit {
    pub model: FitModel,
    pub cv: CvResult,
    pub train_rms: f64,
    pub train_counties: usize,
    pub eval: Evaluation,
}

/// Trains on the train states only and scores the eval states.
pub fn blind_fit(dataset: &Dataset, spec: &BlindSpec, scoring: Scoring<'_>) -> Result<BlindFit> {
    let (train_set, eval_set) = spec.split(dataset)?;
    let (model, cv) = train(&train_set, &spec.cv)?;
    let train_rms = residuals(&model, &train_set)?.rms();
    let eval = evaluate(&model, &eval_set, scoring)?;
    Ok(BlindFit {
        model,
        cv,
        train_rms,
        train_counties: train_set.n(),
        eval,
    })
}

/// Fits on every county and scores every county against that fit.
pub fn global_fit(dataset: &Dataset, cv: &CvConfig, scoring: Scoring<'_>) -> Result<(FitModel, CvResult, Evaluation)> {
    let (model, result) = train(dataset, cv)?;
    let eval = evaluate(&model, dataset, scoring)?;
    Ok((model, result, eval))
}
