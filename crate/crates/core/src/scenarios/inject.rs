use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::blind::{blind_fit, BlindFit, BlindSpec, Scoring};
use crate::anomaly::AnomalyScore;
use crate::data_model::{normalize_fips, Dataset, VoteTally};
use crate::error::{Error, Result};

/// Which party's ballots are moved to the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "R->D")]
    RepToDem,
    #[serde(rename = "D->R")]
    DemToRep,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::RepToDem, Direction::DemToRep];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::RepToDem => "R->D",
            Direction::DemToRep => "D->R",
        }
    }

    pub fn reverse(self) -> Self {
        match self {
            Direction::RepToDem => Direction::DemToRep,
            Direction::DemToRep => Direction::RepToDem,
        }
    }

    /// Votes available to flip in this direction.
    pub fn source_votes(self, tally: &VoteTally) -> u64 {
        match self {
            Direction::RepToDem => tally.rep_votes,
            Direction::DemToRep => tally.dem_votes,
        }
    }

    /// Sign of the share change produced by flipping.
    pub fn sign(self) -> f64 {
        match self {
            Direction::RepToDem => -1.0,
            Direction::DemToRep => 1.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace(['-', '>', ' ', '_'], "").as_str() {
            "RD" | "R2D" | "REPTODEM" => Ok(Direction::RepToDem),
            "DR" | "D2R" | "DEMTOREP" => Ok(Direction::DemToRep),
            _ => Err(Error::Config(format!("unknown flip direction {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub fips: String,
    pub k: u64,
    pub direction: Direction,
}

impl InjectionSpec {
    pub fn new(fips: &str, k: u64, direction: Direction) -> Result<Self> {
        Ok(Self {
            fips: normalize_fips(fips)?,
            k,
            direction,
        })
    }
}

/// Moves `k` target-year ballots between parties in one county, keeping
/// its two-party total fixed.
pub fn inject_flips(dataset: &Dataset, spec: &InjectionSpec) -> Result<Dataset> {
    let i = dataset
        .position(&spec.fips)
        .ok_or_else(|| Error::UnknownCounty(spec.fips.clone()))?;
    let mut out = dataset.clone();
    let tally = out.counties[i]
        .tally_mut(dataset.target_year)
        .expect("target tally checked at construction");
    let available = spec.direction.source_votes(tally);
    if spec.k > available {
        return Err(Error::InjectionShortfall {
            fips: spec.fips.clone(),
            requested: spec.k,
            available,
        });
    }
    match spec.direction {
        Direction::RepToDem => {
            tally.rep_votes -= spec.k;
            tally.dem_votes += spec.k;
        }
        Direction::DemToRep => {
            tally.dem_votes -= spec.k;
            tally.rep_votes += spec.k;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionOutcome {
    pub spec: InjectionSpec,
    /// 1-based rank of the injected county in the eval ranking.
    pub rank: usize,
    pub injected: AnomalyScore,
    pub fit: BlindFit,
}

/// Injects, then runs the blinded fit on the tampered dataset.
pub fn run_injection_experiment(
    dataset: &Dataset,
    blind: &BlindSpec,
    injection: &InjectionSpec,
    scoring: Scoring<'_>,
) -> Result<InjectionOutcome> {
    let i = dataset
        .position(&injection.fips)
        .ok_or_else(|| Error::UnknownCounty(injection.fips.clone()))?;
    let state = &dataset.counties[i].key.state;
    if blind.train_states.contains(state) {
        return Err(Error::Config(format!(
            "injected county {} lies in training state {state}",
            injection.fips
        )));
    }
    if !blind.is_eval(state) {
        return Err(Error::Config(format!(
            "injected county {} lies outside the eval states",
            injection.fips
        )));
    }
    let tampered = inject_flips(dataset, injection)?;
    let fit = blind_fit(&tampered, blind, scoring)?;
    let (rank, score) = fit.eval.find(&injection.fips).expect("eval county is scored");
    Ok(InjectionOutcome {
        spec: injection.clone(),
        rank,
        injected: score.clone(),
        fit,
    })
}
