use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data_model::Dataset;
use crate::elastic_net::{predict_dataset, FitModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    #[serde(rename = "R")]
    Rep,
    #[serde(rename = "D")]
    Dem,
    #[serde(rename = "tie")]
    Tie,
}

impl Winner {
    pub fn as_str(self) -> &'static str {
        match self {
            Winner::Rep => "R",
            Winner::Dem => "D",
            Winner::Tie => "tie",
        }
    }

    fn from_totals(rep: f64, dem: f64) -> Self {
        match rep.total_cmp(&dem) {
            std::cmp::Ordering::Greater => Winner::Rep,
            std::cmp::Ordering::Less => Winner::Dem,
            std::cmp::Ordering::Equal => Winner::Tie,
        }
    }
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Statewide two-party totals. Counterfactual totals may be fractional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub state: String,
    pub rep_total: f64,
    pub dem_total: f64,
    pub margin: f64,
    pub winner: Winner,
}

impl StateSummary {
    fn new(state: &str, rep_total: f64, dem_total: f64) -> Self {
        Self {
            state: state.to_string(),
            rep_total,
            dem_total,
            margin: (rep_total - dem_total).abs(),
            winner: Winner::from_totals(rep_total, dem_total),
        }
    }
}

fn state_indices(dataset: &Dataset, state: &str) -> Result<Vec<usize>> {
    let idx: Vec<usize> = (0..dataset.n())
        .filter(|&i| dataset.counties[i].key.state == state)
        .collect();
    if idx.is_empty() {
        return Err(Error::UnknownState(state.to_string()));
    }
    Ok(idx)
}

/// Integer statewide totals `(rep, dem)` for the target year.
pub fn state_totals(dataset: &Dataset, state: &str) -> Result<(u64, u64)> {
    Ok(state_indices(dataset, state)?
        .into_iter()
        .map(|i| dataset.target_tally(i))
        .fold((0, 0), |(r, d), t| (r + t.rep_votes, d + t.dem_votes)))
}

/// Margin `|rep − dem|` in votes.
pub fn state_margin(dataset: &Dataset, state: &str) -> Result<u64> {
    let (r, d) = state_totals(dataset, state)?;
    Ok(r.abs_diff(d))
}

pub fn state_summary(dataset: &Dataset, state: &str) -> Result<StateSummary> {
    let (r, d) = state_totals(dataset, state)?;
    let mut s = StateSummary::new(state, r as f64, d as f64);
    s.margin = r.abs_diff(d) as f64;
    Ok(s)
}

/// Statewide result if every county had voted exactly as predicted, with
/// each county's two-party total held at its actual value.
pub fn counterfactual_winner(dataset: &Dataset, model: &FitModel, state: &str) -> Result<StateSummary> {
    let idx = state_indices(dataset, state)?;
    let subset = dataset.filter(|c| c.key.state == state);
    let predicted = predict_dataset(model, &subset)?;
    let (mut rep, mut dem) = (0.0, 0.0);
    for (&i, v) in idx.iter().zip(predicted) {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("prediction for {}", dataset.counties[i].key.fips)));
        }
        let v = v.clamp(0.0, 1.0);
        let total = dataset.target_tally(i).two_party_total() as f64;
        rep += v * total;
        dem += (1.0 - v) * total;
    }
    Ok(StateSummary::new(state, rep, dem))
}
