use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flipscan::report::read_ranking_csv;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn synthetic_manifest() -> PathBuf {
    workspace().join("configs/synthetic.toml")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flipscan"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn synthetic_outputs(out: &Path, threads: &str) -> BTreeMap<String, Vec<u8>> {
    let manifest = synthetic_manifest();
    let m = manifest.to_str().unwrap();
    let o = out.to_str().unwrap();
    for cmd in ["synth", "fit", "sweep"] {
        run_ok(&["--manifest", m, "--out", o, "--threads", threads, cmd]);
    }
    read_dir(out)
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = synthetic_outputs(&dir.path().join("t1"), "1");
    let eight = synthetic_outputs(&dir.path().join("t8"), "8");
    assert!(one.contains_key("ranking.csv") && one.contains_key("sweep_curves.csv"));
    assert_eq!(one.keys().collect::<Vec<_>>(), eight.keys().collect::<Vec<_>>());
    for (name, bytes) in &one {
        assert!(bytes == &eight[name], "{name} differs between thread counts");
    }
}

#[test]
fn outputs_carry_the_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let m = synthetic_manifest();
    let o = dir.path().to_str().unwrap();
    run_ok(&["--manifest", m.to_str().unwrap(), "--out", o, "synth"]);
    run_ok(&["--manifest", m.to_str().unwrap(), "--out", o, "fit"]);
    let csv = fs::read_to_string(dir.path().join("ranking.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    let hash = first.strip_prefix("# manifest_sha256=").expect("hash line");
    assert_eq!(hash.len(), 64);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("ranking.json")).unwrap()).unwrap();
    assert_eq!(json["manifest_sha256"], hash);

    // a different output directory leaves the hash unchanged, a different seed does not
    let other = tempfile::tempdir().unwrap();
    let o2 = other.path().to_str().unwrap();
    run_ok(&["--manifest", m.to_str().unwrap(), "--out", o2, "synth"]);
    let synth = fs::read_to_string(other.path().join("synth_summary.txt")).unwrap();
    assert!(synth.contains(hash));
    let o3 = other.path().join("s").to_string_lossy().into_owned();
    run_ok(&["--manifest", m.to_str().unwrap(), "--out", &o3, "--seed", "8", "synth"]);
    let reseeded = fs::read_to_string(Path::new(&o3).join("synth_summary.txt")).unwrap();
    assert!(!reseeded.contains(hash));
}

#[test]
fn ranking_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let m = synthetic_manifest();
    let o = dir.path().to_str().unwrap();
    run_ok(&["--manifest", m.to_str().unwrap(), "--out", o, "synth"]);
    run_ok(&["--manifest", m.to_str().unwrap(), "--out", o, "fit"]);
    let path = dir.path().join("ranking.csv");
    let text = fs::read_to_string(&path).unwrap();
    let hash = text.lines().next().unwrap().strip_prefix("# manifest_sha256=").unwrap();
    let scores = read_ranking_csv(text.as_bytes()).unwrap();
    assert_eq!(scores.len(), 500);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("ranking.json")).unwrap()).unwrap();
    assert_eq!(json["manifest_sha256"], hash);
    let first = &json["scores"][0];
    assert_eq!(first["residual"].as_f64().unwrap(), scores[0].residual);
    assert_eq!(first["global_sigma"].as_f64().unwrap(), scores[0].global_sigma);
    assert_eq!(first["key"]["fips"], scores[0].key.fips.as_str());
}

fn fixture_manifest(dir: &Path, body: &str) -> PathBuf {
    let fixtures = workspace().join("crates/core/tests/fixtures");
    let f = |name: &str| fixtures.join(name).to_string_lossy().replace('\\', "/");
    let text = format!(
        r#"[run]
target_year = 2020

[inputs]
demographics = [
    {{ source = "DP02", path = "{}" }},
    {{ source = "DP03", path = "{}" }},
    {{ source = "DP05", path = "{}" }},
]
elections = [
    {{ year = 2012, path = "{}" }},
    {{ year = 2016, path = "{}" }},
    {{ year = 2020, path = "{}" }},
]
{body}
"#,
        f("dp02.csv"),
        f("dp03.csv"),
        f("dp05.csv"),
        f("election_2012.csv"),
        f("election_2016.csv"),
        f("election_2020.csv"),
    );
    let path = dir.join("manifest.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn ingest_fixture_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixture_manifest(dir.path(), "");
    let o = dir.path().join("out");
    let stdout = run_ok(&["--manifest", m.to_str().unwrap(), "--out", o.to_str().unwrap(), "ingest"]);
    assert!(stdout.contains("counties: 4"), "{stdout}");
    let ds = flipscan_core::ingest::load_dataset(&o.join("dataset.csv")).unwrap();
    assert_eq!(ds.n(), 4);
    assert_eq!(ds.p(), 8);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(o.join("cleaning_report.json")).unwrap()).unwrap();
    assert_eq!(report["dropped_counties"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();

    // train and eval lists share a state
    let text = fs::read_to_string(synthetic_manifest())
        .unwrap()
        .replace(r#"eval_states = ["GA", "MI", "NV", "PA"]"#, r#"eval_states = ["GA", "AL"]"#);
    let overlap = dir.path().join("overlap.toml");
    fs::write(&overlap, text).unwrap();
    let o = dir.path().join("o");
    run_ok(&["--manifest", overlap.to_str().unwrap(), "--out", o.to_str().unwrap(), "synth"]);
    let out = run(&["--manifest", overlap.to_str().unwrap(), "--out", o.to_str().unwrap(), "blind"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("AL"));

    // only Alaskan counties survive the join
    let ak = dir.path().join("ak");
    fs::create_dir(&ak).unwrap();
    let fixtures = workspace().join("crates/core/tests/fixtures");
    for name in ["dp02.csv", "dp03.csv", "dp05.csv", "election_2012.csv", "election_2016.csv", "election_2020.csv"] {
        let text = fs::read_to_string(fixtures.join(name)).unwrap();
        let kept: Vec<&str> = text
            .lines()
            .enumerate()
            .filter(|(i, l)| *i == 0 || l.starts_with("id,") || l.contains("2013,"))
            .map(|(_, l)| l)
            .collect();
        fs::write(ak.join(name), kept.join("\n") + "\n").unwrap();
    }
    let manifest = r#"[inputs]
demographics = [
    { source = "DP02", path = "dp02.csv" },
    { source = "DP03", path = "dp03.csv" },
    { source = "DP05", path = "dp05.csv" },
]
elections = [{ year = 2020, path = "election_2020.csv" }]
"#;
    fs::write(ak.join("m.toml"), manifest).unwrap();
    let out = run(&["--manifest", ak.join("m.toml").to_str().unwrap(), "ingest"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // unknown manifest key
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[run]\nbogus = 1\n").unwrap();
    assert_eq!(run(&["--manifest", bad.to_str().unwrap(), "fit"]).status.code(), Some(2));

    // dataset file missing
    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "[run]\n").unwrap();
    let out = run(&["--manifest", empty.to_str().unwrap(), "--out", dir.path().join("nothing").to_str().unwrap(), "fit"]);
    assert_eq!(out.status.code(), Some(3));

    // malformed dataset contents
    let junk = dir.path().join("junk");
    fs::create_dir(&junk).unwrap();
    fs::write(junk.join("dataset.csv"), "not a dataset\n").unwrap();
    let out = run(&["--manifest", empty.to_str().unwrap(), "--out", junk.to_str().unwrap(), "fit"]);
    assert_eq!(out.status.code(), Some(3));
}
