use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{all_states, state_code, CountyKey, CountyRecord, Dataset, VoteTally};
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

/// Logit-scale intercept of every synthetic election (share ≈ 0.62).
pub const SYNTHETIC_INTERCEPT: f64 = 0.5;
const SYNTHETIC_YEAR: u16 = 2020;
const COEFFICIENT_RANGE: (f64, f64) = (0.05, 0.12);
const SHARE_CLAMP: (f64, f64) = (0.02, 0.98);

fn default_states() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_counties: usize,
    pub n_features: usize,
    pub n_active: usize,
    /// Gaussian noise added to the latent share, in share units.
    pub noise_sd: f64,
    pub seed: u64,
    /// Counties are dealt round-robin over this many real state codes.
    #[serde(default = "default_states")]
    pub n_states: usize,
}

impl SyntheticSpec {
    pub fn new(n_counties: usize, n_features: usize, n_active: usize, noise_sd: f64, seed: u64) -> Self {
        Self {
            n_counties,
            n_features,
            n_active,
            noise_sd,
            seed,
            n_states: default_states(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_active > self.n_features {
            return Err(Error::Config(format!(
                "n_active {} exceeds n_features {}",
                self.n_active, self.n_features
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("noise_sd must be finite and non-negative".into()));
        }
        if self.n_features == 0 || self.n_counties == 0 {
            return Err(Error::Config("synthetic dataset needs counties and features".into()));
        }
        let states = synthetic_states().len();
        if self.n_states == 0 || self.n_states > states {
            return Err(Error::Config(format!("n_states must be in 1..={states}")));
        }
        if self.n_counties.div_ceil(self.n_states) > 500 {
            return Err(Error::Config("more than 500 counties per synthetic state".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    /// True logit-scale coefficients, one per feature.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Noisy, clamped shares before rounding to integer tallies.
    pub latent_shares: Vec<f64>,
}

pub fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn synthetic_states() -> Vec<&'static str> {
    all_states().filter(|s| !matches!(*s, "AK" | "DC" | "PR")).collect()
}

/// Draws a seeded synthetic election with a sparse logistic ground truth.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;

    let mut coef_rng = substream(spec.seed, Domain::SyntheticCoefficients, 0);
    let mut order: Vec<usize> = (0..spec.n_features).collect();
    order.shuffle(&mut coef_rng);
    let mut coefficients = vec![0.0; spec.n_features];
    for &j in &order[..spec.n_active] {
        let magnitude = coef_rng.random_range(COEFFICIENT_RANGE.0..COEFFICIENT_RANGE.1);
        let sign = if coef_rng.random::<bool>() { 1.0 } else { -1.0 };
        coefficients[j] = sign * magnitude;
    }

    let states = synthetic_states();
    let feature_names: Vec<String> = (0..spec.n_features).map(|j| format!("x{j:03}")).collect();
    let (ln_min, ln_max) = (1e3f64.ln(), 1e6f64.ln());

    let mut counties = Vec::with_capacity(spec.n_counties);
    let mut latent_shares = Vec::with_capacity(spec.n_counties);
    for i in 0..spec.n_counties {
        let mut rng = substream(spec.seed, Domain::SyntheticCounties, i as u64);
        let features: Vec<f64> = (0..spec.n_features)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let linear = SYNTHETIC_INTERCEPT
            + features
                .iter()
                .zip(&coefficients)
                .map(|(x, b)| x * b)
                .sum::<f64>();
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * spec.noise_sd;
        let share = (logistic(linear) + noise).clamp(SHARE_CLAMP.0, SHARE_CLAMP.1);
        let total = rng.random_range(ln_min..ln_max).exp().round() as u64;
        let rep = (share * total as f64).round() as u64;

        let state = states[i % spec.n_states];
        let county_number = 2 * (i / spec.n_states) + 1;
        let fips = format!("{}{county_number:03}", state_code(state).expect("known state"));
        counties.push(CountyRecord {
            key: CountyKey::from_fips(&fips, format!("Synthetic County {i}"))?,
            features,
            tallies: vec![VoteTally::new(SYNTHETIC_YEAR, rep, total - rep)],
        });
        latent_shares.push(share);
    }

    Ok(SyntheticDataset {
        dataset: Dataset::new(feature_names, counties, SYNTHETIC_YEAR)?,
        coefficients,
        intercept: SYNTHETIC_INTERCEPT,
        latent_shares,
    })
}
