use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use flipscan_core::data_model::Dataset;
use flipscan_core::ingest::*;
use flipscan_core::Error;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn load_fixtures() -> (Vec<RawTable>, ElectionTable, Vec<ElectionTable>) {
    let opts = ParseOptions::default();
    let tables = [("dp02.csv", SourceId::DP02), ("dp03.csv", SourceId::DP03), ("dp05.csv", SourceId::DP05)]
        .into_iter()
        .map(|(f, s)| parse_table(&fixture(f), s, &opts).unwrap())
        .collect();
    let target = parse_election(&fixture("election_2020.csv"), 2020, &opts).unwrap();
    let priors = [2012, 2016]
        .into_iter()
        .map(|y| parse_election(&fixture(&format!("election_{y}.csv")), y, &opts).unwrap())
        .collect();
    (tables, target, priors)
}

fn pipeline(tables: &[RawTable], target: &ElectionTable, priors: &[ElectionTable]) -> (Dataset, CleaningReport) {
    let (features, report) = clean_features(tables, &CleaningOptions::default()).unwrap();
    assemble_dataset(&features, target, priors, report).unwrap()
}

#[test]
fn fixture_corpus_end_to_end() {
    let (tables, target, priors) = load_fixtures();
    assert_eq!(tables[0].len(), 6, "label row skipped");
    assert_eq!(tables[1].row("01001").unwrap().fips, "01001");
    assert_eq!(target.tallies["01003"].rep_votes, 83_544);

    let (ds, report) = pipeline(&tables, &target, &priors);
    let fips: Vec<&str> = ds.counties.iter().map(|c| c.key.fips.as_str()).collect();
    assert_eq!(fips, ["01001", "01003", "11001", "42101"]);
    assert_eq!(
        ds.feature_names,
        [
            "POP_est",
            "MedianIncome",
            "College_pct",
            "Unemployment_pct",
            "DP05_0001E",
            "MedianAge",
            "vote_share_2012",
            "vote_share_2016"
        ]
    );
    assert_eq!(ds.counties[0].key.name, "Autauga County, Alabama");
    assert_eq!(ds.counties[1].features[0], 218_289.0);
    let share_2012 = ds.counties[0].features[6];
    assert_eq!(share_2012, 17379.0 / (17379.0 + 6363.0));

    let moe: Vec<&str> = report.dropped_moe_columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(moe, ["POP_moe", "DP05_0001M"]);
    assert_eq!(report.dropped_duplicate_columns.len(), 1);
    assert_eq!(report.dropped_duplicate_columns[0].source, SourceId::DP03);
    assert_eq!(
        report.dropped_duplicate_columns[0].reason,
        ColumnDropReason::Duplicate { kept_from: SourceId::DP02 }
    );
    assert_eq!(report.dropped_missing_columns[0].name, "Broadband_pct");
    let dropped: Vec<(&str, &CountyDropReason)> =
        report.dropped_counties.iter().map(|d| (d.fips.as_str(), &d.reason)).collect();
    assert!(dropped.contains(&("02013", &CountyDropReason::Alaska)));
    assert!(dropped.contains(&(
        "42003",
        &CountyDropReason::MissingFromSource { source: "election_2012".into() }
    )));
    assert_eq!(dropped.len(), 2);
    assert_eq!((report.demographic_features, report.prior_share_features, report.counties), (6, 2, 4));

    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(json["dropped_counties"][0]["reason"]["code"], "alaska");
}

#[test]
fn alaska_only_input_is_an_empty_join() {
    let (tables, target, priors) = load_fixtures();
    let only_ak: Vec<RawTable> = tables
        .iter()
        .map(|t| {
            let rows = t.rows.iter().filter(|r| r.fips.starts_with("02")).cloned().collect();
            RawTable::new(t.source, t.path.clone(), t.columns.clone(), rows).unwrap()
        })
        .collect();
    let (features, report) = clean_features(&only_ak, &CleaningOptions::default()).unwrap();
    let err = assemble_dataset(&features, &target, &priors, report).unwrap_err();
    assert!(matches!(err, Error::EmptyJoin));
}

#[test]
fn saved_dataset_reloads_identically() {
    let (tables, target, priors) = load_fixtures();
    let (ds, _) = pipeline(&tables, &target, &priors);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.csv");
    save_dataset(&path, &ds, &["fixture corpus".into()]).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), ds);
}

// Randomized tables over a small county pool that includes Alaska and DC.
const POOL: [&str; 8] = ["01001", "01003", "02013", "02016", "11001", "42003", "42101", "56001"];
const COLUMNS: [&str; 6] = ["A", "B", "C", "D_moe", "E", "F"];

fn raw_table(source: SourceId, fips: Vec<usize>, cols: Vec<usize>, cells: Vec<Option<u16>>) -> RawTable {
    let columns: Vec<String> = cols.iter().map(|&c| COLUMNS[c].to_string()).collect();
    let rows = fips
        .iter()
        .enumerate()
        .map(|(i, &f)| RawRow {
            fips: POOL[f].to_string(),
            cells: (0..cols.len())
                .map(|j| cells[(i * cols.len() + j) % cells.len()].map_or(String::new(), |v| v.to_string()))
                .collect(),
        })
        .collect();
    RawTable::new(source, PathBuf::from(source.as_str()), columns, rows).unwrap()
}

fn election(year: u16, fips: &[usize], votes: &[(u64, u64)]) -> ElectionTable {
    let mut t = ElectionTable {
        year,
        tallies: Default::default(),
        county_names: Default::default(),
    };
    for (i, &f) in fips.iter().enumerate() {
        let (r, d) = votes[i % votes.len()];
        t.tallies
            .insert(POOL[f].to_string(), flipscan_core::data_model::VoteTally::new(year, r, d));
    }
    t
}

fn subset() -> impl Strategy<Value = Vec<usize>> {
    proptest::sample::subsequence((0..POOL.len()).collect::<Vec<_>>(), 3..=POOL.len())
}

fn table_strategy(source: SourceId) -> impl Strategy<Value = RawTable> {
    (
        subset(),
        proptest::sample::subsequence((0..COLUMNS.len()).collect::<Vec<_>>(), 1..=4),
        prop::collection::vec(prop::option::weighted(0.95, 0u16..1000), 1..40),
    )
        .prop_map(move |(f, c, cells)| raw_table(source, f, c, cells))
}

fn election_strategy(year: u16) -> impl Strategy<Value = ElectionTable> {
    (subset(), prop::collection::vec((0u64..500, 1u64..500), 1..8)).prop_map(move |(f, v)| election(year, &f, &v))
}

fn inputs() -> impl Strategy<Value = (Vec<RawTable>, ElectionTable, Vec<ElectionTable>)> {
    (
        table_strategy(SourceId::DP02),
        table_strategy(SourceId::DP03),
        table_strategy(SourceId::DP05),
        election_strategy(2020),
        election_strategy(2012),
        election_strategy(2016),
    )
        .prop_map(|(a, b, c, t, p1, p2)| (vec![a, b, c], t, vec![p1, p2]))
}

fn try_pipeline(
    tables: &[RawTable],
    target: &ElectionTable,
    priors: &[ElectionTable],
) -> Option<(Dataset, CleaningReport)> {
    let (features, report) = clean_features(tables, &CleaningOptions::default()).ok()?;
    assemble_dataset(&features, target, priors, report).ok()
}

proptest! {
    #[test]
    fn input_order_does_not_matter((tables, target, priors) in inputs(), rot in 0usize..3) {
        let forward = try_pipeline(&tables, &target, &priors);
        let mut shuffled = tables.clone();
        shuffled.rotate_left(rot);
        shuffled.swap(0, 1);
        let reversed_priors: Vec<ElectionTable> = priors.iter().rev().cloned().collect();
        prop_assert_eq!(forward, try_pipeline(&shuffled, &target, &reversed_priors));
    }

    #[test]
    fn reassembly_is_idempotent((tables, target, priors) in inputs()) {
        if let Some((ds, _)) = try_pipeline(&tables, &target, &priors) {
            let (features, t, p) = decompose(&ds);
            let (again, report) = assemble_dataset(&features, &t, &p, CleaningReport::default()).unwrap();
            prop_assert!(report.dropped_counties.is_empty());
            prop_assert_eq!(again, ds);
        }
    }

    #[test]
    fn every_county_is_kept_or_dropped_once((tables, target, priors) in inputs()) {
        if let Some((ds, report)) = try_pipeline(&tables, &target, &priors) {
            let mut universe: BTreeSet<String> = tables.iter().flat_map(|t| t.rows.iter().map(|r| r.fips.clone())).collect();
            universe.extend(target.tallies.keys().cloned());
            for p in &priors {
                universe.extend(p.tallies.keys().cloned());
            }
            let kept: BTreeSet<String> = ds.counties.iter().map(|c| c.key.fips.clone()).collect();
            let dropped: Vec<String> = report.dropped_counties.iter().map(|d| d.fips.clone()).collect();
            let dropped_set: BTreeSet<String> = dropped.iter().cloned().collect();
            prop_assert_eq!(dropped.len(), dropped_set.len());
            prop_assert!(kept.is_disjoint(&dropped_set));
            let covered: BTreeSet<String> = kept.union(&dropped_set).cloned().collect();
            prop_assert_eq!(covered, universe);
            prop_assert!(ds.counties.iter().all(|c| c.key.state != "AK"));
        }
    }
}
