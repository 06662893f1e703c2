use std::collections::{BTreeMap, BTreeSet};

use super::clean::{CleaningReport, CountyDropReason, FeatureTable};
use super::election::ElectionTable;
use crate::data_model::{
    compute_vote_share, state_for_fips, CountyKey, CountyRecord, Dataset, PRIOR_SHARE_PREFIX,
};
use crate::error::{Error, Result};

fn source_label(year: u16) -> String {
    format!("election_{year}")
}

/// Inner-joins cleaned features with the target and prior elections.
///
/// Counties are ordered by fips. Alaskan counties are excluded. Each prior
/// election contributes one `vote_share_<year>` feature after the
/// demographic columns. `report` carries drops from earlier stages; every
/// county dropped here is added to it at most once.
pub fn assemble_dataset(
    features: &FeatureTable,
    target: &ElectionTable,
    priors: &[ElectionTable],
    mut report: CleaningReport,
) -> Result<(Dataset, CleaningReport)> {
    let mut priors: Vec<&ElectionTable> = priors.iter().collect();
    priors.sort_by_key(|e| e.year);
    let mut years = BTreeSet::from([target.year]);
    for p in &priors {
        if !years.insert(p.year) {
            return Err(Error::Config(format!("election year {} supplied twice", p.year)));
        }
    }

    let mut all_fips: BTreeSet<&str> = features.rows.keys().map(String::as_str).collect();
    all_fips.extend(target.tallies.keys().map(String::as_str));
    for p in &priors {
        all_fips.extend(p.tallies.keys().map(String::as_str));
    }

    let mut names = features.names.clone();
    names.extend(priors.iter().map(|p| format!("{PRIOR_SHARE_PREFIX}{}", p.year)));

    let mut counties = Vec::new();
    for fips in all_fips {
        match join_county(fips, features, target, &priors) {
            Ok(record) => counties.push(record),
            Err(reason) => report.drop_county(fips, reason),
        }
    }
    if counties.is_empty() {
        return Err(Error::EmptyJoin);
    }
    report.prior_share_features = priors.len();
    report.demographic_features = features.names.len();
    report.counties = counties.len();
    let dataset = Dataset::new(names, counties, target.year)?;
    Ok((dataset, report))
}

fn join_county(
    fips: &str,
    features: &FeatureTable,
    target: &ElectionTable,
    priors: &[&ElectionTable],
) -> std::result::Result<CountyRecord, CountyDropReason> {
    let state = state_for_fips(fips).ok_or(CountyDropReason::UnknownState)?;
    if state == "AK" {
        return Err(CountyDropReason::Alaska);
    }
    let missing = |source: String| CountyDropReason::MissingFromSource { source };
    let values = features
        .rows
        .get(fips)
        .ok_or_else(|| missing("demographics".into()))?;
    let mut tallies = Vec::with_capacity(priors.len() + 1);
    let mut shares = Vec::with_capacity(priors.len());
    for election in priors.iter().copied().chain([target]) {
        let tally = *election
            .tallies
            .get(fips)
            .ok_or_else(|| missing(source_label(election.year)))?;
        let share = compute_vote_share(fips, &tally)
            .map_err(|_| CountyDropReason::ZeroTwoPartyVotes { year: election.year })?;
        if election.year != target.year {
            shares.push(share.value());
        }
        tallies.push(tally);
    }
    tallies.sort_by_key(|t| t.year);
    let name = features
        .county_names
        .get(fips)
        .or_else(|| target.county_names.get(fips))
        .cloned()
        .unwrap_or_default();
    let mut row = values.clone();
    row.extend(shares);
    Ok(CountyRecord {
        key: CountyKey {
            fips: fips.to_string(),
            state: state.to_string(),
            name,
        },
        features: row,
        tallies,
    })
}

/// Splits an assembled dataset back into its join inputs. Vote-share
/// features are dropped because assembly re-derives them from the tallies.
pub fn decompose(dataset: &Dataset) -> (FeatureTable, ElectionTable, Vec<ElectionTable>) {
    let demographic: Vec<usize> = dataset
        .feature_names
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.starts_with(PRIOR_SHARE_PREFIX))
        .map(|(i, _)| i)
        .collect();
    let names = demographic.iter().map(|&i| dataset.feature_names[i].clone()).collect();
    let mut rows = BTreeMap::new();
    let mut county_names = BTreeMap::new();
    let mut elections: BTreeMap<u16, ElectionTable> = BTreeMap::new();
    for c in &dataset.counties {
        let fips = c.key.fips.clone();
        rows.insert(fips.clone(), demographic.iter().map(|&i| c.features[i]).collect());
        county_names.insert(fips.clone(), c.key.name.clone());
        for t in &c.tallies {
            elections
                .entry(t.year)
                .or_insert_with(|| ElectionTable {
                    year: t.year,
                    tallies: BTreeMap::new(),
                    county_names: BTreeMap::new(),
                })
                .tallies
                .insert(fips.clone(), *t);
        }
    }
    let target = elections.remove(&dataset.target_year).unwrap_or(ElectionTable {
        year: dataset.target_year,
        tallies: BTreeMap::new(),
        county_names: BTreeMap::new(),
    });
    (
        FeatureTable {
            names,
            rows,
            county_names,
        },
        target,
        elections.into_values().collect(),
    )
}
