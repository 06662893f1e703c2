//! File outputs: ranking tables, choropleth joins, sweep exports and charts.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use flipscan_core::anomaly::{AnomalyScore, GlobalSource};
use flipscan_core::data_model::CountyKey;
use flipscan_core::scenarios::{Direction, StateSweep};
use flipscan_core::{Error, Result};

pub const HASH_KEY: &str = "manifest_sha256";

fn csv_err(e: csv::Error) -> Error {
    Error::csv("<report>", e)
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<report>", e)
}

/// Shortest representation that parses back to the same bits.
fn exact(v: f64) -> String {
    format!("{v:?}")
}

fn hash_line(out: &mut impl Write, sha: &str) -> Result<()> {
    writeln!(out, "# {HASH_KEY}={sha}").map_err(io_err)
}

/// Serializes `value` as pretty JSON with the manifest hash as a top-level key.
pub fn json_with_hash(value: &impl Serialize, sha: &str) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    match &mut v {
        Value::Object(map) => {
            map.insert(HASH_KEY.into(), Value::String(sha.into()));
        }
        other => {
            let inner = std::mem::take(other);
            *other = serde_json::json!({ HASH_KEY: sha, "data": inner });
        }
    }
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Schema(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

const RANKING_HEADER: [&str; 10] = [
    "rank",
    "fips",
    "state",
    "name",
    "actual",
    "predicted",
    "residual",
    "local_sigma",
    "global_sigma",
    "global_source",
];

/// Full-precision ranking; `rank` is the 1-based row order.
pub fn write_ranking_csv(out: impl Write, scores: &[AnomalyScore], sha: &str) -> Result<()> {
    let mut out = out;
    hash_line(&mut out, sha)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RANKING_HEADER).map_err(csv_err)?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            s.key.fips.clone(),
            s.key.state.clone(),
            s.key.name.clone(),
            exact(s.actual),
            exact(s.predicted),
            exact(s.residual),
            exact(s.local_sigma),
            exact(s.global_sigma),
            s.global_source.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_ranking_csv(reader: impl BufRead) -> Result<Vec<AnomalyScore>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RANKING_HEADER) {
        return Err(Error::Schema("not a ranking file".into()));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Schema(format!("bad number {s:?} in ranking")))
    };
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok(AnomalyScore {
                key: CountyKey {
                    fips: rec[1].to_string(),
                    state: rec[2].to_string(),
                    name: rec[3].to_string(),
                },
                actual: num(&rec[4])?,
                predicted: num(&rec[5])?,
                residual: num(&rec[6])?,
                local_sigma: num(&rec[7])?,
                global_sigma: num(&rec[8])?,
                global_source: GlobalSource::parse(&rec[9])
                    .ok_or_else(|| Error::Schema(format!("unknown source {:?}", &rec[9])))?,
            })
        })
        .collect()
}

/// FIPS-ordered join table for choropleth tools.
pub fn write_residual_join(out: impl Write, scores: &[AnomalyScore], sha: &str) -> Result<()> {
    let mut sorted: Vec<&AnomalyScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.key.fips.cmp(&b.key.fips));
    let mut out = out;
    hash_line(&mut out, sha)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["fips", "residual", "local_sigma", "global_sigma"])
        .map_err(csv_err)?;
    for s in sorted {
        w.write_record([
            s.key.fips.clone(),
            exact(s.residual),
            exact(s.local_sigma),
            exact(s.global_sigma),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Serialize)]
struct RankingDoc<'a> {
    title: &'a str,
    counties: usize,
    scores: &'a [AnomalyScore],
}

pub fn ranking_json(title: &str, scores: &[AnomalyScore], sha: &str) -> Result<String> {
    json_with_hash(
        &RankingDoc {
            title,
            counties: scores.len(),
            scores,
        },
        sha,
    )
}

/// Fixed-width table: shares in percent and σ to one decimal.
pub fn ranking_table(title: &str, scores: &[AnomalyScore], top_n: usize, sha: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {HASH_KEY}={sha}");
    let _ = writeln!(s, "{title}");
    let _ = writeln!(
        s,
        "{:>4}  {:<32} {:<5} {:>8} {:>10} {:>8} {:>9}",
        "rank", "county", "state", "actual", "predicted", "local", "global"
    );
    for (i, sc) in scores.iter().take(top_n).enumerate() {
        let _ = writeln!(
            s,
            "{:>4}  {:<32} {:<5} {:>7.1}% {:>9.1}% {:>7.1}σ {:>8.1}σ",
            i + 1,
            truncate(&sc.key.name, 32),
            sc.key.state,
            100.0 * sc.actual,
            100.0 * sc.predicted,
            sc.local_sigma,
            sc.global_sigma
        );
    }
    s
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

pub fn write_sweep_samples(out: impl Write, sweeps: &[StateSweep], sha: &str) -> Result<()> {
    let mut out = out;
    hash_line(&mut out, sha)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "fips", "name", "direction", "k", "residual", "local_sigma", "global_sigma"])
        .map_err(csv_err)?;
    for sw in sweeps {
        for c in &sw.curves {
            for p in &c.samples {
                w.write_record([
                    sw.summary.state.clone(),
                    c.key.fips.clone(),
                    c.key.name.clone(),
                    c.direction.to_string(),
                    p.k.to_string(),
                    exact(p.residual),
                    exact(p.local_sigma),
                    exact(p.global_sigma),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(io_err)
}

pub fn write_sweep_curves(out: impl Write, sweeps: &[StateSweep], sha: &str) -> Result<()> {
    let mut out = out;
    hash_line(&mut out, sha)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "state",
        "fips",
        "name",
        "direction",
        "source_votes",
        "k_detect",
        "margin_threshold",
        "literal_threshold",
        "unconstrained",
        "unconstrained_literal",
        "favors_winner",
    ])
    .map_err(csv_err)?;
    for sw in sweeps {
        for c in &sw.curves {
            w.write_record([
                sw.summary.state.clone(),
                c.key.fips.clone(),
                c.key.name.clone(),
                c.direction.to_string(),
                c.source_votes.to_string(),
                c.k_detect.map_or_else(String::new, |k| k.to_string()),
                c.margin_threshold.to_string(),
                c.literal_threshold.to_string(),
                c.unconstrained.to_string(),
                c.unconstrained_literal.to_string(),
                c.favors_winner.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn sweep_summary(sweeps: &[StateSweep], sha: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {HASH_KEY}={sha}");
    for sw in sweeps {
        let names: Vec<&str> = sw.unconstrained_counties().iter().map(|k| k.name.as_str()).collect();
        let _ = writeln!(
            s,
            "{}: winner {}, margin {} votes, grid step {}, eligible curves {}",
            sw.summary.state,
            sw.summary.winner,
            sw.margin,
            sw.step,
            sw.curves.len()
        );
        let _ = writeln!(s, "{}: unconstrained counties: {}", sw.summary.state, names.len());
        if !names.is_empty() {
            let _ = writeln!(s, "{}:   {}", sw.summary.state, names.join("; "));
        }
        let _ = writeln!(
            s,
            "{}: unconstrained at literal threshold: {}; by direction R->D {}, D->R {}",
            sw.summary.state,
            sw.unconstrained_literal_counties().len(),
            sw.unconstrained_count(Direction::RepToDem),
            sw.unconstrained_count(Direction::DemToRep)
        );
        for note in &sw.notes {
            let _ = writeln!(s, "{}: note: {note}", sw.summary.state);
        }
    }
    s
}

/// Line chart of significance against flipped votes, one line per curve,
/// with dashed guides at the margin and the detection threshold.
pub fn sweep_svg(sweep: &StateSweep, detection_sigma: f64, sha: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 440.0;
    const L: f64 = 60.0;
    const R: f64 = 20.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;
    let k_max = sweep
        .curves
        .iter()
        .flat_map(|c| c.samples.last().map(|s| s.k))
        .max()
        .unwrap_or(0)
        .max(2 * sweep.margin)
        .max(1) as f64;
    let y_max = sweep
        .curves
        .iter()
        .flat_map(|c| c.samples.iter().map(|s| s.global_sigma))
        .fold(detection_sigma + 1.0, f64::max)
        .ceil();
    let x = |k: f64| L + (W - L - R) * k / k_max;
    let y = |s: f64| H - B - (H - T - B) * s / y_max;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, "<!-- {HASH_KEY}={sha} -->");
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}: global significance vs flipped votes (margin {})</text>"#,
        W / 2.0,
        xml_escape(&sweep.summary.state),
        sweep.margin
    );
    let _ = writeln!(
        s,
        r#"<path d="M{L},{T} L{L},{} L{},{}" fill="none" stroke="black"/>"#,
        H - B,
        W - R,
        H - B
    );
    for i in 0..=y_max as u32 {
        let yy = y(i as f64);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{i}</text>"#,
            L - 6.0,
            yy + 4.0
        );
    }
    for i in 0..=4 {
        let k = k_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.0}</text>"#,
            x(k),
            H - B + 16.0,
            k
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">flipped votes</text>"#,
        (L + W - R) / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">global significance (σ)</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{L}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="#444" stroke-dasharray="6 4"/>"##,
        y(detection_sigma),
        W - R,
        y(detection_sigma)
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.1}" y1="{T}" x2="{:.1}" y2="{}" stroke="#444" stroke-dasharray="6 4"/>"##,
        x(sweep.margin as f64),
        x(sweep.margin as f64),
        H - B
    );
    for c in &sweep.curves {
        let color = match c.direction {
            Direction::RepToDem => "#1f5fbf",
            Direction::DemToRep => "#c0392b",
        };
        let pts: Vec<String> = c
            .samples
            .iter()
            .map(|p| format!("{:.1},{:.1}", x(p.k as f64), y(p.global_sigma)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2" stroke-opacity="0.8"><title>{} {}</title></polyline>"#,
            pts.join(" "),
            xml_escape(&c.key.name),
            c.direction
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Writes through a temporary file so a failed run leaves no partial output.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
