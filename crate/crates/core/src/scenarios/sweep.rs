use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blind::{BlindFit, BlindSpec};
use super::inject::Direction;
use super::summary::{state_margin, state_summary, StateSummary, Winner};
use crate::anomaly::GlobalSignificance;
use crate::data_model::{CountyKey, Dataset};
use crate::error::{Error, Result};

pub const DETECTION_SIGMA: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Grid step is `max(1, M / resolution)` votes.
    pub resolution: u64,
    pub detection_sigma: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            resolution: 50,
            detection_sigma: DETECTION_SIGMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub k: u64,
    pub residual: f64,
    pub local_sigma: f64,
    /// Significance of the shift in the flip direction; zero while the
    /// residual points the other way.
    pub global_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub key: CountyKey,
    pub direction: Direction,
    pub source_votes: u64,
    pub samples: Vec<SweepSample>,
    pub k_detect: Option<u64>,
    /// Flips compared against `k_detect` under the figure convention (M).
    pub margin_threshold: u64,
    /// Flips that literally overturn the margin, ⌈(M+1)/2⌉.
    pub literal_threshold: u64,
    pub unconstrained: bool,
    pub unconstrained_literal: bool,
    /// Flips move votes toward the state's actual winner.
    pub favors_winner: bool,
}

impl SweepCurve {
    fn classify(&mut self) {
        let escapes = |threshold: u64| self.k_detect.is_none_or(|k| k > threshold);
        self.unconstrained = escapes(self.margin_threshold);
        self.unconstrained_literal = escapes(self.literal_threshold);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSweep {
    pub summary: StateSummary,
    pub margin: u64,
    pub step: u64,
    /// Residual width of the untampered eval set, held fixed along curves.
    pub width: f64,
    pub n_eval: usize,
    pub curves: Vec<SweepCurve>,
    pub notes: Vec<String>,
}

impl StateSweep {
    /// Counties whose winner-favoring curve escapes detection up to M.
    pub fn unconstrained_counties(&self) -> Vec<&CountyKey> {
        self.curves
            .iter()
            .filter(|c| c.favors_winner && c.unconstrained)
            .map(|c| &c.key)
            .collect()
    }

    pub fn unconstrained_literal_counties(&self) -> Vec<&CountyKey> {
        self.curves
            .iter()
            .filter(|c| c.favors_winner && c.unconstrained_literal)
            .map(|c| &c.key)
            .collect()
    }

    pub fn unconstrained_count(&self, direction: Direction) -> usize {
        self.curves
            .iter()
            .filter(|c| c.direction == direction && c.unconstrained)
            .count()
    }
}

/// Sample points `0, s, 2s, …` up to `k_max`, always ending at `k_max`.
pub fn k_grid(k_max: u64, step: u64) -> Vec<u64> {
    let step = step.max(1);
    let mut ks: Vec<u64> = (0..=k_max / step).map(|i| i * step).collect();
    if ks.last() != Some(&k_max) {
        ks.push(k_max);
    }
    ks
}

fn favors(direction: Direction, winner: Winner) -> bool {
    match winner {
        Winner::Dem => direction == Direction::RepToDem,
        Winner::Rep => direction == Direction::DemToRep,
        Winner::Tie => true,
    }
}

/// Significance-versus-flips curves for every eligible county of `state`.
///
/// The blinded model is reused for every k: training excludes eval states,
/// so tampering cannot change it. The residual width stays at the
/// untampered eval-set fit, and the trial count is the eval-county count.
pub fn sweep(
    dataset: &Dataset,
    fit: &BlindFit,
    spec: &BlindSpec,
    state: &str,
    options: &SweepOptions,
    significance: &dyn GlobalSignificance,
) -> Result<StateSweep> {
    if !spec.is_eval(state) {
        return Err(Error::Config(format!("sweep state {state} is not an eval state")));
    }
    if options.resolution == 0 {
        return Err(Error::Config("sweep resolution must be positive".into()));
    }
    let summary = state_summary(dataset, state)?;
    let margin = state_margin(dataset, state)?;
    let step = (margin / options.resolution).max(1);
    let eval = &fit.eval.residuals;
    let width = fit.eval.width.width;
    let n_eval = eval.len();

    let mut tasks = Vec::new();
    for (i, county) in dataset.counties.iter().enumerate() {
        if county.key.state != state {
            continue;
        }
        let j = eval
            .keys
            .iter()
            .position(|k| k.fips == county.key.fips)
            .ok_or_else(|| Error::UnknownCounty(county.key.fips.clone()))?;
        for direction in Direction::BOTH {
            if direction.source_votes(dataset.target_tally(i)) > margin {
                tasks.push((i, eval.predicted[j], direction));
            }
        }
    }

    let curves = tasks
        .par_iter()
        .map(|&(i, predicted, direction)| {
            let tally = dataset.target_tally(i);
            let source = direction.source_votes(tally);
            let total = tally.two_party_total() as f64;
            let sign = direction.sign();
            let mut samples = Vec::new();
            let mut floor = 0.0f64;
            for k in k_grid(source.min(2 * margin), step) {
                let rep = match direction {
                    Direction::RepToDem => tally.rep_votes - k,
                    Direction::DemToRep => tally.rep_votes + k,
                };
                let residual = rep as f64 / total - predicted;
                let local = residual / width;
                let directed = (sign * local).max(0.0);
                let global = significance.assess(directed, n_eval)?.sigma.min(directed);
                // simulated estimates can dip where the estimator switches regime
                floor = floor.max(global);
                samples.push(SweepSample {
                    k,
                    residual,
                    local_sigma: local,
                    global_sigma: floor,
                });
            }
            let k_detect = samples
                .iter()
                .find(|s| s.global_sigma >= options.detection_sigma)
                .map(|s| s.k);
            let mut curve = SweepCurve {
                key: dataset.counties[i].key.clone(),
                direction,
                source_votes: source,
                samples,
                k_detect,
                margin_threshold: margin,
                literal_threshold: (margin + 2) / 2,
                unconstrained: false,
                unconstrained_literal: false,
                favors_winner: favors(direction, summary.winner),
            };
            curve.classify();
            Ok(curve)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut notes = Vec::new();
    if curves.is_empty() {
        notes.push(format!("no county in {state} has more than {margin} votes of either party"));
    }
    Ok(StateSweep {
        summary,
        margin,
        step,
        width,
        n_eval,
        curves,
        notes,
    })
}
