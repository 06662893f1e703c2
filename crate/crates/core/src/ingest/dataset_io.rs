use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use regex::Regex;

use crate::data_model::{CountyKey, CountyRecord, Dataset, VoteTally};
use crate::error::{Error, Result};

const MAGIC: &str = "flipscan dataset v1";

fn schema(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Schema(format!("{}: {msg}", path.display()))
}

/// Writes `fips,state,name,votes_rep_<Y>,votes_dem_<Y>…,<features…>`.
///
/// Floats use the shortest round-trip representation, so reading the file
/// back reproduces the dataset bit for bit. `comments` are emitted as
/// leading `# ` lines after the format line.
pub fn write_dataset(mut out: impl Write, dataset: &Dataset, comments: &[String]) -> Result<()> {
    let years: BTreeSet<u16> = dataset
        .counties
        .iter()
        .flat_map(|c| c.tallies.iter().map(|t| t.year))
        .collect();
    let io = |e| Error::io("<dataset output>", e);
    writeln!(out, "# {MAGIC} target_year={}", dataset.target_year).map_err(io)?;
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["fips".to_string(), "state".into(), "name".into()];
    for y in &years {
        header.push(format!("votes_rep_{y}"));
        header.push(format!("votes_dem_{y}"));
    }
    header.extend(dataset.feature_names.iter().cloned());
    let csv_err = |e| Error::csv("<dataset output>", e);
    w.write_record(&header).map_err(csv_err)?;
    for c in &dataset.counties {
        let mut rec = vec![c.key.fips.clone(), c.key.state.clone(), c.key.name.clone()];
        for y in &years {
            let t = c
                .tally(*y)
                .ok_or_else(|| Error::Schema(format!("county {} has no {y} tally", c.key.fips)))?;
            rec.push(t.rep_votes.to_string());
            rec.push(t.dem_votes.to_string());
        }
        rec.extend(c.features.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn save_dataset(path: &Path, dataset: &Dataset, comments: &[String]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(std::io::BufWriter::new(file), dataset, comments)
}

pub fn read_dataset(mut reader: impl BufRead, path: &Path) -> Result<Dataset> {
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let target_year: u16 = first
        .trim()
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|l| l.strip_prefix(MAGIC))
        .and_then(|rest| rest.trim().strip_prefix("target_year="))
        .and_then(|y| y.trim().parse().ok())
        .ok_or_else(|| schema(path, "missing dataset format line"))?;

    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let header: Vec<String> = csv
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 3 || header[..3] != ["fips", "state", "name"] {
        return Err(schema(path, "header must start with fips,state,name"));
    }
    let vote = Regex::new(r"^votes_(rep|dem)_(\d{4})$").expect("static pattern");
    let mut vote_cols: BTreeMap<u16, [Option<usize>; 2]> = BTreeMap::new();
    let mut feature_cols = Vec::new();
    for (i, h) in header.iter().enumerate().skip(3) {
        match vote.captures(h) {
            Some(c) => {
                let year: u16 = c[2].parse().expect("four digits");
                let slot = usize::from(&c[1] == "dem");
                vote_cols.entry(year).or_default()[slot] = Some(i);
            }
            None => feature_cols.push(i),
        }
    }
    let mut years = Vec::new();
    for (year, cols) in &vote_cols {
        match cols {
            [Some(r), Some(d)] => years.push((*year, *r, *d)),
            _ => return Err(schema(path, format!("incomplete vote columns for {year}"))),
        }
    }
    let names = feature_cols.iter().map(|&i| header[i].clone()).collect();

    let mut counties = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let key = CountyKey::from_fips(&record[0], &record[2])?;
        if key.state != record[1] {
            return Err(schema(path, format!("line {line}: state {} does not match fips {}", &record[1], key.fips)));
        }
        let count = |i: usize| {
            record[i].parse::<u64>().map_err(|_| Error::InvalidCount {
                path: path.to_path_buf(),
                line,
                column: header[i].clone(),
                value: record[i].to_string(),
            })
        };
        let tallies = years
            .iter()
            .map(|&(y, r, d)| Ok(VoteTally::new(y, count(r)?, count(d)?)))
            .collect::<Result<Vec<_>>>()?;
        let features = feature_cols
            .iter()
            .map(|&i| {
                record[i]
                    .parse::<f64>()
                    .map_err(|_| schema(path, format!("line {line}: bad value {:?} in {}", &record[i], header[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        counties.push(CountyRecord {
            key,
            features,
            tallies,
        });
    }
    Dataset::new(names, counties, target_year)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{generate_synthetic, SyntheticSpec};

    #[test]
    fn synthetic_round_trip_is_exact() {
        let ds = generate_synthetic(&SyntheticSpec::new(40, 6, 3, 0.01, 7)).unwrap().dataset;
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds, &["manifest_sha256=abc".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# flipscan dataset v1 target_year=2020\n# manifest_sha256=abc\n"));
        let back = read_dataset(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn multi_year_and_names_with_commas() {
        let text = "# flipscan dataset v1 target_year=2020\nfips,state,name,votes_rep_2016,votes_dem_2016,votes_rep_2020,votes_dem_2020,x,vote_share_2016\n26163,MI,\"Wayne County, Michigan\",1,3,2,6,0.5,0.25\n";
        let ds = read_dataset(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(ds.counties[0].key.name, "Wayne County, Michigan");
        assert_eq!(ds.counties[0].tallies.len(), 2);
        assert_eq!(ds.target_tally(0).rep_votes, 2);
        assert_eq!(ds.feature_names, vec!["x", "vote_share_2016"]);
    }

    #[test]
    fn rejects_bad_files() {
        let no_magic = "fips,state,name\n";
        assert!(read_dataset(no_magic.as_bytes(), Path::new("m")).is_err());
        let half = "# flipscan dataset v1 target_year=2020\nfips,state,name,votes_rep_2020,x\n01001,AL,a,1,0.5\n";
        assert!(matches!(read_dataset(half.as_bytes(), Path::new("m")), Err(Error::Schema(_))));
        let wrong_state = "# flipscan dataset v1 target_year=2020\nfips,state,name,votes_rep_2020,votes_dem_2020,x\n01001,TX,a,1,1,0.5\n";
        assert!(read_dataset(wrong_state.as_bytes(), Path::new("m")).is_err());
    }
}
