use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data_model::normalize_fips;
use crate::error::{Error, Result};

/// Origin of a raw table. Demographic sources are listed in duplicate
/// precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceId {
    DP02,
    DP03,
    DP05,
    #[serde(rename = "election")]
    Election,
}

impl SourceId {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceId::DP02 => "DP02",
            SourceId::DP03 => "DP03",
            SourceId::DP05 => "DP05",
            SourceId::Election => "election",
        }
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DP02" => Ok(SourceId::DP02),
            "DP03" => Ok(SourceId::DP03),
            "DP05" => Ok(SourceId::DP05),
            "ELECTION" => Ok(SourceId::Election),
            _ => Err(Error::Config(format!("unknown table source {s:?}"))),
        }
    }
}

const FIPS_COLUMNS: [&str; 4] = ["fips", "geo_id", "county_fips", "geoid"];
/// Descriptive columns kept as labels rather than features.
pub const LABEL_COLUMNS: [&str; 6] = ["name", "county", "county_name", "state", "state_po", "geographic area name"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOptions {
    pub delimiter: u8,
    /// Key column; when unset, the first of `fips`, `GEO_ID`,
    /// `county_fips`, `GEOID` (case-insensitive) is used.
    pub fips_column: Option<String>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            fips_column: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    pub fips: String,
    pub cells: Vec<String>,
}

/// Verbatim string cells keyed by normalized fips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub source: SourceId,
    pub path: PathBuf,
    /// Header names of every non-key column.
    pub columns: Vec<String>,
    pub rows: Vec<RawRow>,
    index: HashMap<String, usize>,
}

impl RawTable {
    pub fn new(source: SourceId, path: PathBuf, columns: Vec<String>, rows: Vec<RawRow>) -> Result<Self> {
        let mut index = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.cells.len() != columns.len() {
                return Err(Error::Schema(format!("row {} has the wrong width", row.fips)));
            }
            if index.insert(row.fips.clone(), i).is_some() {
                return Err(Error::DuplicateFips {
                    path: path.clone(),
                    fips: row.fips.clone(),
                });
            }
        }
        Ok(Self {
            source,
            path,
            columns,
            rows,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, fips: &str) -> Option<&RawRow> {
        self.index.get(fips).map(|&i| &self.rows[i])
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.eq_ignore_ascii_case(name))
    }

    pub fn cell(&self, fips: &str, column: usize) -> Option<&str> {
        self.row(fips).map(|r| r.cells[column].as_str())
    }

    /// First label column holding a county name, if any.
    pub fn name_column(&self) -> Option<usize> {
        ["name", "county_name", "county", "geographic area name"]
            .iter()
            .find_map(|n| self.column_index(n))
    }
}

fn is_label_row(cell: &str) -> bool {
    !cell.bytes().any(|b| b.is_ascii_digit())
}

/// Parses delimiter-separated text with a header row.
pub fn parse_reader(
    reader: impl Read,
    path: &Path,
    source: SourceId,
    options: &ParseOptions,
) -> Result<RawTable> {
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header: Vec<String> = csv
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    let key = match &options.fips_column {
        Some(name) => header.iter().position(|h| h.eq_ignore_ascii_case(name)),
        None => FIPS_COLUMNS
            .iter()
            .find_map(|c| header.iter().position(|h| h.eq_ignore_ascii_case(c))),
    }
    .ok_or_else(|| Error::Schema(format!("{}: no fips column in header", path.display())))?;

    let columns: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != key)
        .map(|(_, h)| h.clone())
        .collect();
    let mut rows = Vec::new();
    for (k, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let raw_key = &record[key];
        // survey downloads carry a second, descriptive header row
        if k == 0 && is_label_row(raw_key) {
            continue;
        }
        let fips = normalize_fips(raw_key).map_err(|_| {
            Error::Schema(format!("{}: line {line}: invalid fips {raw_key:?}", path.display()))
        })?;
        let cells = record
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != key)
            .map(|(_, c)| c.to_string())
            .collect();
        rows.push(RawRow { fips, cells });
    }
    RawTable::new(source, path.to_path_buf(), columns, rows)
}

pub fn parse_table(path: &Path, source: SourceId, options: &ParseOptions) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(std::io::BufReader::new(file), path, source, options)
}

/// Strips surrounding whitespace and thousands separators, then parses.
pub fn parse_number(cell: &str) -> Option<f64> {
    let cleaned: String = cell.trim().chars().filter(|c| *c != ',').collect();
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RawTable> {
        parse_reader(text.as_bytes(), Path::new("fixture.csv"), SourceId::DP02, &ParseOptions::default())
    }

    #[test]
    fn three_counties() {
        let t = parse("fips,NAME,POP_est\n1001,Autauga,55000\n01003,Baldwin,200000\n48427,Starr,64000\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.rows[0].fips, "01001");
        assert_eq!(t.columns, vec!["NAME", "POP_est"]);
        assert_eq!(t.cell("48427", 1), Some("64000"));
        assert_eq!(t.name_column(), Some(0));
    }

    #[test]
    fn duplicate_fips_is_named() {
        let err = parse("fips,a\n1001,1\n01001,2\n").unwrap_err();
        assert!(err.to_string().contains("01001"), "{err}");
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse("fips,a,b\n1001,1,2\n1003,1\n").unwrap_err();
        assert!(matches!(err, Error::RaggedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn census_style_headers() {
        let t = parse("GEO_ID,NAME,DP02_0001E\nid,Geographic Area Name,Estimate!!Total\n0500000US01001,\"Autauga County, Alabama\",21559\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.rows[0].fips, "01001");
    }

    #[test]
    fn semicolon_delimiter() {
        let opts = ParseOptions {
            delimiter: b';',
            fips_column: Some("code".into()),
        };
        let t = parse_reader("code;x\n1001;1,5\n".as_bytes(), Path::new("f"), SourceId::DP03, &opts).unwrap();
        assert_eq!(t.cell("01001", 0), Some("1,5"));
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number(" 1,234 "), Some(1234.0));
        assert_eq!(parse_number("-0.5"), Some(-0.5));
        assert_eq!(parse_number(""), None);
        assert_eq!(parse_number("(X)"), None);
        assert_eq!(parse_number("N"), None);
    }
}
