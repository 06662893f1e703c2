//! County records, vote-share arithmetic and the assembled regression dataset.

mod fips;
mod standardize;
mod synthetic;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fips::{all_states, normalize_fips, state_code, state_for_fips};
pub use standardize::{apply_standardization, standardize, DesignMatrix, StandardizationParams};
pub use synthetic::{generate_synthetic, logistic, SyntheticDataset, SyntheticSpec};

/// Feature names appended by assembly for the prior-election vote shares.
pub const PRIOR_SHARE_PREFIX: &str = "vote_share_";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CountyKey {
    pub fips: String,
    pub state: String,
    pub name: String,
}

impl CountyKey {
    /// Builds a key from a raw county code, deriving the state from its prefix.
    pub fn from_fips(raw: &str, name: impl Into<String>) -> Result<Self> {
        let fips = normalize_fips(raw)?;
        let state = state_for_fips(&fips).ok_or_else(|| Error::InvalidFips(raw.to_string()))?;
        Ok(Self {
            fips,
            state: state.to_string(),
            name: name.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub year: u16,
    pub rep_votes: u64,
    pub dem_votes: u64,
}

impl VoteTally {
    pub fn new(year: u16, rep_votes: u64, dem_votes: u64) -> Self {
        Self {
            year,
            rep_votes,
            dem_votes,
        }
    }

    pub fn two_party_total(&self) -> u64 {
        self.rep_votes + self.dem_votes
    }
}

/// Republican fraction of the two-party vote.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoteShare(f64);

impl VoteShare {
    pub fn new(value: f64) -> Self {
        Self(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Republican two-party share. Third-party ballots are ignored entirely.
pub fn compute_vote_share(fips: &str, tally: &VoteTally) -> Result<VoteShare> {
    let total = tally.two_party_total();
    if total == 0 {
        return Err(Error::ZeroTwoPartyTotal {
            fips: fips.to_string(),
            year: tally.year,
        });
    }
    Ok(VoteShare(tally.rep_votes as f64 / total as f64))
}

/// A named feature vector. Names and values are parallel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<'a> {
    pub names: &'a [String],
    pub values: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountyRecord {
    pub key: CountyKey,
    pub features: Vec<f64>,
    /// One tally per election year, sorted by year.
    pub tallies: Vec<VoteTally>,
}

impl CountyRecord {
    pub fn tally(&self, year: u16) -> Option<&VoteTally> {
        self.tallies.iter().find(|t| t.year == year)
    }

    pub(crate) fn tally_mut(&mut self, year: u16) -> Option<&mut VoteTally> {
        self.tallies.iter_mut().find(|t| t.year == year)
    }
}

/// Counties aligned on a shared feature schema, with the regression target
/// taken from `target_year` tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub counties: Vec<CountyRecord>,
    pub target_year: u16,
}

impl Dataset {
    /// Validates the structural invariants and builds the dataset.
    pub fn new(
        feature_names: Vec<String>,
        counties: Vec<CountyRecord>,
        target_year: u16,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name {name:?}")));
            }
        }
        let mut fips = HashSet::new();
        for county in &counties {
            let key = &county.key;
            if !fips.insert(key.fips.as_str()) {
                return Err(Error::Schema(format!("duplicate fips {}", key.fips)));
            }
            if key.state == "AK" {
                return Err(Error::Schema(format!("Alaskan county {} in dataset", key.fips)));
            }
            if state_for_fips(&key.fips) != Some(key.state.as_str()) {
                return Err(Error::Schema(format!(
                    "fips {} does not belong to state {}",
                    key.fips, key.state
                )));
            }
            if county.features.len() != feature_names.len() {
                return Err(Error::Schema(format!(
                    "county {} has {} features, expected {}",
                    key.fips,
                    county.features.len(),
                    feature_names.len()
                )));
            }
            if let Some(i) = county.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "feature {} of county {}",
                    feature_names[i], key.fips
                )));
            }
            let tally = county.tally(target_year).ok_or_else(|| {
                Error::Schema(format!("county {} has no {target_year} tally", key.fips))
            })?;
            compute_vote_share(&key.fips, tally)?;
        }
        Ok(Self {
            feature_names,
            counties,
            target_year,
        })
    }

    pub fn n(&self) -> usize {
        self.counties.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counties.is_empty()
    }

    pub fn features(&self, index: usize) -> FeatureVector<'_> {
        FeatureVector {
            names: &self.feature_names,
            values: &self.counties[index].features,
        }
    }

    pub fn target_tally(&self, index: usize) -> &VoteTally {
        self.counties[index]
            .tally(self.target_year)
            .expect("target tally checked at construction")
    }

    /// Target-year vote shares, one per county.
    pub fn target_shares(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let t = self.target_tally(i);
                t.rep_votes as f64 / t.two_party_total() as f64
            })
            .collect()
    }

    pub fn position(&self, fips: &str) -> Option<usize> {
        self.counties.iter().position(|c| c.key.fips == fips)
    }

    pub fn states(&self) -> BTreeSet<&str> {
        self.counties.iter().map(|c| c.key.state.as_str()).collect()
    }

    /// Counties satisfying `keep`, in original order.
    pub fn filter(&self, keep: impl Fn(&CountyRecord) -> bool) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            counties: self.counties.iter().filter(|c| keep(c)).cloned().collect(),
            target_year: self.target_year,
        }
    }

    /// Count of features that are not prior-election vote shares.
    pub fn demographic_feature_count(&self) -> usize {
        self.feature_names
            .iter()
            .filter(|n| !n.starts_with(PRIOR_SHARE_PREFIX))
            .count()
    }
}
