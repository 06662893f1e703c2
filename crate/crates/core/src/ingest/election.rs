use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::table::{parse_reader, ParseOptions, RawTable, SourceId};
use crate::data_model::VoteTally;
use crate::error::{Error, Result};

pub const REP_COLUMN: &str = "rep_votes";
pub const DEM_COLUMN: &str = "dem_votes";

/// Two-party tallies for one election year, keyed by fips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionTable {
    pub year: u16,
    pub tallies: BTreeMap<String, VoteTally>,
    pub county_names: BTreeMap<String, String>,
}

impl ElectionTable {
    pub fn len(&self) -> usize {
        self.tallies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tallies.is_empty()
    }
}

/// Accepts `1234`, `1,234` and integral decimals such as `1234.0`.
fn parse_count(cell: &str) -> Option<u64> {
    let cleaned: String = cell.trim().chars().filter(|c| *c != ',').collect();
    if let Ok(v) = cleaned.parse::<u64>() {
        return Some(v);
    }
    let v: f64 = cleaned.parse().ok()?;
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53)).then_some(v as u64)
}

pub fn election_from_raw(raw: &RawTable, year: u16) -> Result<ElectionTable> {
    let column = |name: &str| {
        raw.column_index(name).ok_or_else(|| {
            Error::Schema(format!("{}: missing column {name:?}", raw.path.display()))
        })
    };
    let rep = column(REP_COLUMN)?;
    let dem = column(DEM_COLUMN)?;
    let name_col = raw.name_column();
    let mut tallies = BTreeMap::new();
    let mut county_names = BTreeMap::new();
    for (i, row) in raw.rows.iter().enumerate() {
        let count = |col: usize| {
            parse_count(&row.cells[col]).ok_or_else(|| Error::InvalidCount {
                path: raw.path.clone(),
                line: i as u64 + 2,
                column: raw.columns[col].clone(),
                value: row.cells[col].clone(),
            })
        };
        tallies.insert(row.fips.clone(), VoteTally::new(year, count(rep)?, count(dem)?));
        if let Some(c) = name_col {
            county_names.insert(row.fips.clone(), row.cells[c].trim().to_string());
        }
    }
    Ok(ElectionTable {
        year,
        tallies,
        county_names,
    })
}

pub fn parse_election_reader(reader: impl Read, path: &Path, year: u16, options: &ParseOptions) -> Result<ElectionTable> {
    let raw = parse_reader(reader, path, SourceId::Election, options)?;
    election_from_raw(&raw, year)
}

/// Reads `fips, rep_votes, dem_votes` (plus optional label columns).
pub fn parse_election(path: &Path, year: u16, options: &ParseOptions) -> Result<ElectionTable> {
    let raw = super::table::parse_table(path, SourceId::Election, options)?;
    election_from_raw(&raw, year)
}
