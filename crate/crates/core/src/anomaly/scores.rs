use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::significance::{GlobalSignificance, GlobalSource};
use super::width::WidthFit;
use crate::data_model::{CountyKey, Dataset};
use crate::elastic_net::{predict_dataset, FitModel};
use crate::error::{Error, Result};

/// Residuals `actual − predicted` over an evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSet {
    pub keys: Vec<CountyKey>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl ResidualSet {
    pub fn from_parts(keys: Vec<CountyKey>, actual: Vec<f64>, predicted: Vec<f64>) -> Result<Self> {
        if keys.len() != actual.len() || actual.len() != predicted.len() {
            return Err(Error::Schema("residual set columns differ in length".into()));
        }
        let residuals: Vec<f64> = actual.iter().zip(&predicted).map(|(a, p)| a - p).collect();
        if residuals.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("residuals".into()));
        }
        Ok(Self {
            keys,
            actual,
            predicted,
            residuals,
        })
    }

    /// Evaluation-set size, the look-elsewhere trial count.
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn rms(&self) -> f64 {
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.len() as f64).sqrt()
    }
}

/// Scores every county of `dataset` against `model`.
pub fn residuals(model: &FitModel, dataset: &Dataset) -> Result<ResidualSet> {
    let predicted = predict_dataset(model, dataset)?;
    let keys = dataset.counties.iter().map(|c| c.key.clone()).collect();
    ResidualSet::from_parts(keys, dataset.target_shares(), predicted)
}

/// `r / width`, signed.
pub fn local_significance(residual: f64, width: &WidthFit) -> f64 {
    residual / width.width
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScore {
    pub key: CountyKey,
    pub actual: f64,
    pub predicted: f64,
    pub residual: f64,
    pub local_sigma: f64,
    pub global_sigma: f64,
    pub global_source: GlobalSource,
}

/// Local and look-elsewhere-corrected significance for every residual,
/// with the trial count taken as the residual-set size.
pub fn score_residuals(
    set: &ResidualSet,
    width: &WidthFit,
    significance: &dyn GlobalSignificance,
) -> Result<Vec<AnomalyScore>> {
    let n = set.len();
    (0..n)
        .map(|i| {
            let local = local_significance(set.residuals[i], width);
            let global = significance.assess(local, n)?;
            Ok(AnomalyScore {
                key: set.keys[i].clone(),
                actual: set.actual[i],
                predicted: set.predicted[i],
                residual: set.residuals[i],
                local_sigma: local,
                global_sigma: global.sigma.min(local.abs()),
                global_source: global.source,
            })
        })
        .collect()
}

fn rank_order(a: &AnomalyScore, b: &AnomalyScore) -> Ordering {
    b.local_sigma
        .abs()
        .total_cmp(&a.local_sigma.abs())
        .then_with(|| a.key.fips.cmp(&b.key.fips))
}

/// Sorts by |local σ| descending, ties by fips ascending, keeping `top_n`.
pub fn rank_anomalies(mut scores: Vec<AnomalyScore>, top_n: Option<usize>) -> Vec<AnomalyScore> {
    scores.sort_by(rank_order);
    if let Some(n) = top_n {
        scores.truncate(n);
    }
    scores
}

/// Relative Poisson counting uncertainty `1/√votes`. Diagnostic only.
pub fn counting_noise_floor(total_two_party_votes: u64) -> Result<f64> {
    if total_two_party_votes == 0 {
        return Err(Error::Config("counting noise floor needs votes > 0".into()));
    }
    Ok(1.0 / (total_two_party_votes as f64).sqrt())
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("county sizes have zero variance".into()));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("|residuals| have zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation between log two-party turnout and |residual|.
pub fn size_correlation(set: &ResidualSet, dataset: &Dataset) -> Result<f64> {
    if set.len() < 3 {
        return Err(Error::Config("size correlation needs at least 3 counties".into()));
    }
    let mut log_size = Vec::with_capacity(set.len());
    for key in &set.keys {
        let i = dataset
            .position(&key.fips)
            .ok_or_else(|| Error::UnknownCounty(key.fips.clone()))?;
        log_size.push((dataset.target_tally(i).two_party_total() as f64).ln());
    }
    let abs_res: Vec<f64> = set.residuals.iter().map(|r| r.abs()).collect();
    pearson(&log_size, &abs_res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::significance::Analytic;
    use crate::data_model::{CountyRecord, VoteTally};
    use crate::elastic_net::{fit, PenaltyConfig, SolverOptions};

    fn key(fips: &str) -> CountyKey {
        CountyKey::from_fips(fips, "c").unwrap()
    }

    fn score(fips: &str, local: f64) -> AnomalyScore {
        AnomalyScore {
            key: key(fips),
            actual: 0.5,
            predicted: 0.5,
            residual: local * 0.01,
            local_sigma: local,
            global_sigma: 0.0,
            global_source: GlobalSource::Analytic,
        }
    }

    #[test]
    fn local_examples() {
        let w = |width| WidthFit {
            width,
            clip_iterations: 1,
            n_used: 100,
        };
        assert_eq!(local_significance(0.0, &w(0.01)), 0.0);
        assert!((local_significance(0.475 - 0.342, &w(0.0128)) - 10.4).abs() < 0.05);
        assert!((local_significance(-0.073, &w(0.0124)) + 5.9).abs() < 0.05);
    }

    #[test]
    fn magnitude_order_and_ties() {
        let ranked = rank_anomalies(vec![score("01001", 2.0), score("01003", -3.0), score("01005", 1.0)], None);
        let locals: Vec<f64> = ranked.iter().map(|s| s.local_sigma).collect();
        assert_eq!(locals, vec![-3.0, 2.0, 1.0]);
        let tied = rank_anomalies(vec![score("01009", 2.0), score("01003", -2.0)], Some(1));
        assert_eq!(tied.len(), 1);
        assert_eq!(tied[0].key.fips, "01003");
    }

    #[test]
    fn two_county_residuals() {
        let counties = vec![
            CountyRecord {
                key: key("01001"),
                features: vec![1.0],
                tallies: vec![VoteTally::new(2020, 40, 60)],
            },
            CountyRecord {
                key: key("01003"),
                features: vec![2.0],
                tallies: vec![VoteTally::new(2020, 60, 40)],
            },
        ];
        let ds = Dataset::new(vec!["f".into()], counties, 2020).unwrap();
        let mut model = fit(&ds, PenaltyConfig::new(0.0, 0.5).unwrap(), &SolverOptions::default()).unwrap();
        model.coefficients = vec![0.0];
        model.intercept = 0.5;
        let set = residuals(&model, &ds).unwrap();
        assert!((set.residuals[0] + 0.1).abs() < 1e-15);
        assert!((set.residuals[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn global_never_exceeds_local() {
        let n = 50;
        let keys: Vec<CountyKey> = (0..n).map(|i| key(&format!("01{:03}", 2 * i + 1))).collect();
        let actual: Vec<f64> = (0..n).map(|i| 0.5 + (i as f64 - 25.0) * 0.002).collect();
        let set = ResidualSet::from_parts(keys, actual, vec![0.5; n]).unwrap();
        let width = super::super::fit_width(&set.residuals).unwrap();
        for s in score_residuals(&set, &width, &Analytic).unwrap() {
            assert!(s.global_sigma <= s.local_sigma.abs());
            assert!(s.local_sigma == 0.0 || s.local_sigma.signum() == s.residual.signum());
        }
    }

    #[test]
    fn noise_floor() {
        assert!((counting_noise_floor(10_000).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(counting_noise_floor(1).unwrap(), 1.0);
        assert!((counting_noise_floor(1_000_000).unwrap() - 0.001).abs() < 1e-15);
        assert!(counting_noise_floor(0).is_err());
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&x, &[1.0; 4]), Err(Error::UndefinedCorrelation(_))));
    }
}
