use std::collections::{BTreeMap, BTreeSet, HashMap};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::table::{parse_number, RawTable, SourceId, LABEL_COLUMNS};
use crate::error::{Error, Result};

/// Matches survey margin-of-error identifiers: `DP02_0001M`, `DP02_0001PM`,
/// `*_moe`, and labels spelling out "margin of error".
pub const DEFAULT_MOE_PATTERN: &str = r"(?i)(^DP\d{2}[A-Z]?_\d{4}P?M$|_moe$|margin of error)";

#[derive(Debug, Clone)]
pub struct CleaningOptions {
    pub moe_pattern: Regex,
}

impl CleaningOptions {
    pub fn with_pattern(pattern: &str) -> Result<Self> {
        let moe_pattern = Regex::new(pattern)
            .map_err(|e| Error::Config(format!("margin-of-error pattern: {e}")))?;
        Ok(Self { moe_pattern })
    }
}

impl Default for CleaningOptions {
    fn default() -> Self {
        Self::with_pattern(DEFAULT_MOE_PATTERN).expect("default pattern compiles")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum ColumnDropReason {
    MarginOfError,
    Duplicate { kept_from: SourceId },
    MissingValue { fips: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub source: SourceId,
    pub reason: ColumnDropReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum CountyDropReason {
    Alaska,
    UnknownState,
    MissingFromSource { source: String },
    ZeroTwoPartyVotes { year: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCounty {
    pub fips: String,
    pub reason: CountyDropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub dropped_moe_columns: Vec<DroppedColumn>,
    pub dropped_duplicate_columns: Vec<DroppedColumn>,
    pub dropped_missing_columns: Vec<DroppedColumn>,
    pub dropped_counties: Vec<DroppedCounty>,
    /// Demographic features surviving cleaning.
    pub demographic_features: usize,
    /// Prior-election vote-share features appended at assembly.
    pub prior_share_features: usize,
    pub counties: usize,
}

impl CleaningReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Schema(e.to_string()))
    }

    pub(crate) fn drop_county(&mut self, fips: &str, reason: CountyDropReason) {
        if !self.dropped_counties.iter().any(|d| d.fips == fips) {
            self.dropped_counties.push(DroppedCounty {
                fips: fips.to_string(),
                reason,
            });
        }
    }
}

/// Numeric features keyed by fips, after cleaning.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: BTreeMap<String, Vec<f64>>,
    pub county_names: BTreeMap<String, String>,
}

struct Candidate<'a> {
    table: &'a RawTable,
    column: usize,
}

/// Applies, in order: margin-of-error removal, cross-table duplicate
/// removal (DP02 → DP03 → DP05 precedence), and removal of any column with
/// a blank or non-numeric cell among the counties present in every table.
pub fn clean_features(
    tables: &[RawTable],
    options: &CleaningOptions,
) -> Result<(FeatureTable, CleaningReport)> {
    if tables.is_empty() {
        return Err(Error::Config("no demographic tables supplied".into()));
    }
    let mut ordered: Vec<&RawTable> = tables.iter().collect();
    ordered.sort_by_key(|t| t.source);

    let mut report = CleaningReport::default();

    let mut common: BTreeSet<&str> = ordered[0].rows.iter().map(|r| r.fips.as_str()).collect();
    for t in &ordered[1..] {
        let present: BTreeSet<&str> = t.rows.iter().map(|r| r.fips.as_str()).collect();
        common = common.intersection(&present).copied().collect();
    }
    let all_fips: BTreeSet<&str> = ordered
        .iter()
        .flat_map(|t| t.rows.iter().map(|r| r.fips.as_str()))
        .collect();
    for fips in all_fips.difference(&common) {
        let missing = ordered
            .iter()
            .find(|t| t.row(fips).is_none())
            .expect("fips absent from some table");
        report.drop_county(
            fips,
            CountyDropReason::MissingFromSource {
                source: missing.source.to_string(),
            },
        );
    }

    let mut county_names = BTreeMap::new();
    for t in &ordered {
        if let Some(col) = t.name_column() {
            for fips in &common {
                county_names
                    .entry(fips.to_string())
                    .or_insert_with(|| t.cell(fips, col).unwrap_or_default().trim().to_string());
            }
        }
    }

    let mut kept: Vec<(String, Candidate<'_>)> = Vec::new();
    let mut first_source: HashMap<String, SourceId> = HashMap::new();
    for t in &ordered {
        for (column, name) in t.columns.iter().enumerate() {
            if LABEL_COLUMNS.iter().any(|l| name.eq_ignore_ascii_case(l)) {
                continue;
            }
            if options.moe_pattern.is_match(name) {
                report.dropped_moe_columns.push(DroppedColumn {
                    name: name.clone(),
                    source: t.source,
                    reason: ColumnDropReason::MarginOfError,
                });
                continue;
            }
            if let Some(&kept_from) = first_source.get(name) {
                report.dropped_duplicate_columns.push(DroppedColumn {
                    name: name.clone(),
                    source: t.source,
                    reason: ColumnDropReason::Duplicate { kept_from },
                });
                continue;
            }
            first_source.insert(name.clone(), t.source);
            kept.push((name.clone(), Candidate { table: t, column }));
        }
    }

    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    'columns: for (name, cand) in kept {
        let mut values = Vec::with_capacity(common.len());
        for fips in &common {
            let cell = cand.table.cell(fips, cand.column).expect("common fips");
            match parse_number(cell) {
                Some(v) => values.push(v),
                None => {
                    report.dropped_missing_columns.push(DroppedColumn {
                        name,
                        source: cand.table.source,
                        reason: ColumnDropReason::MissingValue {
                            fips: fips.to_string(),
                            value: cell.to_string(),
                        },
                    });
                    continue 'columns;
                }
            }
        }
        names.push(name);
        columns.push(values);
    }
    if names.is_empty() {
        return Err(Error::NoSurvivingColumns);
    }
    for d in &report.dropped_missing_columns {
        log::debug!("dropped column {} from {}: {:?}", d.name, d.source, d.reason);
    }

    let rows = common
        .iter()
        .enumerate()
        .map(|(i, fips)| (fips.to_string(), columns.iter().map(|c| c[i]).collect()))
        .collect();
    report.demographic_features = names.len();
    Ok((
        FeatureTable {
            names,
            rows,
            county_names,
        },
        report,
    ))
}
