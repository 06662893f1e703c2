//! Subcommand implementations. Each reads a loaded manifest, runs the
//! analysis and writes its files from this single thread.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use flipscan_core::anomaly::{
    counting_noise_floor, global_p_analytic, global_significance_analytic, size_correlation, MonteCarlo,
};
use flipscan_core::data_model::{generate_synthetic, Dataset};
use flipscan_core::elastic_net::{CvResult, FitModel};
use flipscan_core::ingest::{
    assemble_dataset, clean_features, load_dataset, parse_election, parse_table, save_dataset,
};
use flipscan_core::scenarios::{
    blind_fit, counterfactual_winner, global_fit, run_injection_experiment, state_summary, sweep, Evaluation,
    Scoring,
};
use flipscan_core::{Error, Result};

use crate::manifest::LoadedManifest;
use crate::report::{
    json_with_hash, ranking_json, ranking_table, sweep_summary, sweep_svg, write_file, write_ranking_csv,
    write_residual_join, write_sweep_curves, write_sweep_samples, HASH_KEY,
};

/// Files written and a human-readable summary for the terminal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Writer {
    dir: PathBuf,
    sha: String,
    out: CommandOutput,
}

impl Writer {
    fn new(lm: &LoadedManifest) -> Result<Self> {
        let dir = lm.out_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            sha: lm.sha256.clone(),
            out: CommandOutput::default(),
        })
    }

    fn bytes(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_file(&path, contents)?;
        self.out.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        self.bytes(name, contents.as_bytes())
    }

    fn with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>, &str) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf, &self.sha)?;
        self.bytes(name, &buf)
    }

    fn summary(&mut self, name: &str, body: &str) -> Result<CommandOutput> {
        let text = format!("# {HASH_KEY}={}\n{body}", self.sha);
        self.text(name, &text)?;
        self.out.summary = body.to_string();
        Ok(std::mem::take(&mut self.out))
    }

    fn ranking(&mut self, prefix: &str, title: &str, scores: &[flipscan_core::anomaly::AnomalyScore], top_n: usize) -> Result<()> {
        let sha = self.sha.clone();
        self.with(&format!("{prefix}ranking.csv"), |b, s| write_ranking_csv(b, scores, s))?;
        self.text(&format!("{prefix}ranking.json"), &ranking_json(title, scores, &sha)?)?;
        self.text(&format!("{prefix}ranking.txt"), &ranking_table(title, scores, top_n, &sha))?;
        self.with(&format!("{prefix}residuals.csv"), |b, s| write_residual_join(b, scores, s))
    }

    fn model(&mut self, name: &str, model: &FitModel, cv: &CvResult) -> Result<()> {
        let doc: serde_json::Value =
            serde_json::from_str(&model.to_json(Some(cv))?).map_err(|e| Error::Schema(e.to_string()))?;
        let text = json_with_hash(&doc, &self.sha)?;
        self.text(name, &text)
    }
}

fn scoring_parts(lm: &LoadedManifest) -> Result<(Box<dyn flipscan_core::anomaly::WidthEstimator>, Box<dyn flipscan_core::anomaly::GlobalSignificance>)> {
    Ok((lm.manifest.width_estimator()?, lm.manifest.significance()?))
}

fn load(lm: &LoadedManifest) -> Result<Dataset> {
    let path = lm.dataset_path();
    let ds = load_dataset(&path)?;
    if ds.target_year != lm.manifest.run.target_year {
        return Err(Error::Config(format!(
            "{} targets {}, manifest says {}",
            path.display(),
            ds.target_year,
            lm.manifest.run.target_year
        )));
    }
    Ok(ds)
}

fn fit_lines(s: &mut String, label: &str, model: &FitModel, cv: &CvResult, eval: &Evaluation) {
    let _ = writeln!(s, "{label} alpha: {:.6}", model.penalty.alpha);
    let _ = writeln!(s, "{label} l1_ratio: {}", model.penalty.l1_ratio);
    let _ = writeln!(s, "{label} cv mean mse: {:.6e} over {} folds", cv.selected_point().mean_mse, cv.folds);
    let _ = writeln!(s, "{label} nonzero coefficients: {} of {}", model.nonzero_count(), model.coefficients.len());
    let _ = writeln!(s, "{label} residual width: {:.4}% ({} of {} residuals after clipping)", 100.0 * eval.width.width, eval.width.n_used, eval.residuals.len());
}

pub fn cmd_ingest(lm: &LoadedManifest) -> Result<CommandOutput> {
    let m = &lm.manifest;
    let opts = m.parse_options()?;
    let sources = m.demographic_sources()?;
    if sources.is_empty() {
        return Err(Error::Config("manifest lists no demographic tables".into()));
    }
    let tables = sources
        .par_iter()
        .map(|(id, p)| parse_table(&lm.resolve(p), *id, &opts))
        .collect::<Result<Vec<_>>>()?;
    let (features, report) = clean_features(&tables, &m.cleaning_options()?)?;
    let mut elections = m
        .inputs
        .elections
        .par_iter()
        .map(|e| parse_election(&lm.resolve(&e.path), e.year, &opts))
        .collect::<Result<Vec<_>>>()?;
    let target_pos = elections
        .iter()
        .position(|e| e.year == m.run.target_year)
        .ok_or_else(|| Error::Config(format!("no election file for target year {}", m.run.target_year)))?;
    let target = elections.swap_remove(target_pos);
    let (dataset, report) = assemble_dataset(&features, &target, &elections, report)?;
    log::info!("assembled {} counties with {} features", dataset.n(), dataset.p());

    let mut w = Writer::new(lm)?;
    let path = lm.dataset_path();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    save_dataset(&path, &dataset, &[format!("{HASH_KEY}={}", lm.sha256)])?;
    w.out.files.push(path);
    w.text("cleaning_report.json", &json_with_hash(&report, &lm.sha256)?)?;
    let mut s = String::new();
    let _ = writeln!(s, "counties: {}", dataset.n());
    let _ = writeln!(s, "features: {} demographic + {} prior vote shares", report.demographic_features, report.prior_share_features);
    let _ = writeln!(
        s,
        "dropped: {} margin-of-error, {} duplicate, {} incomplete columns; {} counties",
        report.dropped_moe_columns.len(),
        report.dropped_duplicate_columns.len(),
        report.dropped_missing_columns.len(),
        report.dropped_counties.len()
    );
    w.summary("ingest_summary.txt", &s)
}

pub fn cmd_fit(lm: &LoadedManifest) -> Result<CommandOutput> {
    let ds = load(lm)?;
    let (width, sig) = scoring_parts(lm)?;
    let scoring = Scoring {
        width: width.as_ref(),
        significance: sig.as_ref(),
    };
    let (model, cv, eval) = global_fit(&ds, &lm.manifest.cv_config(), scoring)?;
    let mut w = Writer::new(lm)?;
    w.model("model.json", &model, &cv)?;
    w.ranking("", "Most anomalous counties (global fit)", &eval.scores, lm.manifest.report.top_n)?;

    let mut s = String::new();
    let _ = writeln!(s, "counties: {}", ds.n());
    let _ = writeln!(s, "features: {}", ds.p());
    fit_lines(&mut s, "fit", &model, &cv, &eval);
    let _ = writeln!(s, "rms residual: {:.4}%", 100.0 * eval.rms());
    let over = eval.scores.iter().filter(|x| x.global_sigma >= 4.0).count();
    let _ = writeln!(s, "counties at or above 4 sigma global: {over}");
    match size_correlation(&eval.residuals, &ds) {
        Ok(r) => {
            let _ = writeln!(s, "correlation(log two-party votes, |residual|): {r:.3}");
        }
        Err(e) => {
            let _ = writeln!(s, "correlation(log two-party votes, |residual|): undefined ({e})");
        }
    }
    let mut floors: Vec<f64> = (0..ds.n())
        .filter_map(|i| counting_noise_floor(ds.target_tally(i).two_party_total()).ok())
        .collect();
    floors.sort_by(f64::total_cmp);
    if let Some(median) = floors.get(floors.len() / 2) {
        let _ = writeln!(s, "median counting noise floor: {:.4}%", 100.0 * median);
    }
    w.summary("fit_summary.txt", &s)
}

#[derive(Serialize)]
struct CounterfactualRow {
    state: String,
    actual_winner: String,
    actual_margin: f64,
    counterfactual_winner: String,
    counterfactual_rep: f64,
    counterfactual_dem: f64,
    counterfactual_margin: f64,
}

pub fn cmd_blind(lm: &LoadedManifest) -> Result<CommandOutput> {
    let ds = load(lm)?;
    let spec = lm.manifest.blind_spec()?;
    let (width, sig) = scoring_parts(lm)?;
    let scoring = Scoring {
        width: width.as_ref(),
        significance: sig.as_ref(),
    };
    let fit = blind_fit(&ds, &spec, scoring)?;
    let mut w = Writer::new(lm)?;
    w.model("blind_model.json", &fit.model, &fit.cv)?;
    w.ranking("blind_", "Most anomalous counties (blinded fit, eval states)", &fit.eval.scores, lm.manifest.report.top_n)?;

    let mut rows = Vec::new();
    for state in &spec.eval_states {
        let Ok(actual) = state_summary(&ds, state) else {
            continue;
        };
        let cf = counterfactual_winner(&ds, &fit.model, state)?;
        rows.push(CounterfactualRow {
            state: state.clone(),
            actual_winner: actual.winner.to_string(),
            actual_margin: actual.margin,
            counterfactual_winner: cf.winner.to_string(),
            counterfactual_rep: cf.rep_total,
            counterfactual_dem: cf.dem_total,
            counterfactual_margin: cf.margin,
        });
    }
    w.with("counterfactual.csv", |b, sha| {
        use std::io::Write;
        writeln!(b, "# {HASH_KEY}={sha}").map_err(|e| Error::io("<report>", e))?;
        let mut c = csv::Writer::from_writer(b);
        for r in &rows {
            c.serialize(r).map_err(|e| Error::csv("<report>", e))?;
        }
        c.flush().map_err(|e| Error::io("<report>", e))
    })?;

    let mut s = String::new();
    let _ = writeln!(s, "train counties: {}", fit.train_counties);
    let _ = writeln!(s, "eval counties: {}", fit.eval.residuals.len());
    fit_lines(&mut s, "blind", &fit.model, &fit.cv, &fit.eval);
    let _ = writeln!(s, "train rms residual: {:.4}%", 100.0 * fit.train_rms);
    let _ = writeln!(s, "eval rms residual: {:.4}%", 100.0 * fit.eval.rms());
    for r in &rows {
        let _ = writeln!(
            s,
            "counterfactual {}: {} (actual {}, predicted margin {:.0})",
            r.state, r.counterfactual_winner, r.actual_winner, r.counterfactual_margin
        );
    }
    w.summary("blind_summary.txt", &s)
}

pub fn cmd_inject(lm: &LoadedManifest) -> Result<CommandOutput> {
    let ds = load(lm)?;
    let spec = lm.manifest.blind_spec()?;
    let inj = lm.manifest.injection()?;
    let (width, sig) = scoring_parts(lm)?;
    let scoring = Scoring {
        width: width.as_ref(),
        significance: sig.as_ref(),
    };
    let before = blind_fit(&ds, &spec, scoring)?;
    let after = run_injection_experiment(&ds, &spec, &inj, scoring)?;
    let (rank_before, score_before) = before
        .eval
        .find(&inj.fips)
        .ok_or_else(|| Error::UnknownCounty(inj.fips.clone()))?;

    let mut w = Writer::new(lm)?;
    w.ranking("inject_", "Most anomalous counties after injection", &after.fit.eval.scores, lm.manifest.report.top_n)?;
    let phases = [("before", rank_before, score_before), ("after", after.rank, &after.injected)];
    w.with("inject_comparison.csv", |b, sha| {
        use std::io::Write;
        writeln!(b, "# {HASH_KEY}={sha}").map_err(|e| Error::io("<report>", e))?;
        let mut c = csv::Writer::from_writer(b);
        c.write_record(["phase", "fips", "name", "k", "direction", "rank", "actual", "predicted", "residual", "local_sigma", "global_sigma", "width"])
            .map_err(|e| Error::csv("<report>", e))?;
        for ((phase, rank, sc), width) in phases.iter().zip([before.eval.width.width, after.fit.eval.width.width]) {
            c.write_record([
                phase.to_string(),
                sc.key.fips.clone(),
                sc.key.name.clone(),
                inj.k.to_string(),
                inj.direction.to_string(),
                rank.to_string(),
                format!("{:?}", sc.actual),
                format!("{:?}", sc.predicted),
                format!("{:?}", sc.residual),
                format!("{:?}", sc.local_sigma),
                format!("{:?}", sc.global_sigma),
                format!("{width:?}"),
            ])
            .map_err(|e| Error::csv("<report>", e))?;
        }
        c.flush().map_err(|e| Error::io("<report>", e))
    })?;

    let mut s = String::new();
    let _ = writeln!(s, "injected: {} {} ({}), k = {}", inj.fips, score_before.key.name, inj.direction, inj.k);
    let _ = writeln!(s, "eval counties: {}", after.fit.eval.residuals.len());
    for (phase, rank, sc) in phases {
        let _ = writeln!(
            s,
            "{phase}: rank {rank}, actual {:.1}%, predicted {:.1}%, residual {:+.1} pts, local {:+.1}σ, global {:.1}σ",
            100.0 * sc.actual,
            100.0 * sc.predicted,
            100.0 * sc.residual,
            sc.local_sigma,
            sc.global_sigma
        );
    }
    w.summary("inject_summary.txt", &s)
}

pub fn cmd_sweep(lm: &LoadedManifest) -> Result<CommandOutput> {
    let ds = load(lm)?;
    let spec = lm.manifest.blind_spec()?;
    let (width, sig) = scoring_parts(lm)?;
    let scoring = Scoring {
        width: width.as_ref(),
        significance: sig.as_ref(),
    };
    let states = if lm.manifest.sweep.states.is_empty() {
        spec.eval_states.iter().cloned().collect()
    } else {
        lm.manifest.sweep.states.iter().map(|s| s.trim().to_ascii_uppercase()).collect::<Vec<_>>()
    };
    let fit = blind_fit(&ds, &spec, scoring)?;
    let options = lm.manifest.sweep_options();
    let sweeps = states
        .iter()
        .map(|st| sweep(&ds, &fit, &spec, st, &options, sig.as_ref()))
        .collect::<Result<Vec<_>>>()?;

    let mut w = Writer::new(lm)?;
    w.with("sweep.csv", |b, sha| write_sweep_samples(b, &sweeps, sha))?;
    w.with("sweep_curves.csv", |b, sha| write_sweep_curves(b, &sweeps, sha))?;
    for sw in &sweeps {
        let svg = sweep_svg(sw, options.detection_sigma, &lm.sha256);
        w.text(&format!("sweep_{}.svg", sw.summary.state), &svg)?;
    }
    let body = sweep_summary(&sweeps, &lm.sha256);
    let body = body.split_once('\n').map_or("", |(_, rest)| rest).to_string();
    w.summary("sweep_summary.txt", &body)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub z: f64,
    pub n: usize,
    pub analytic_sigma: f64,
    pub analytic_p: f64,
    pub mc_sigma: f64,
    pub mc_std_error: f64,
    pub mc_p: f64,
    pub exceedances: usize,
    /// `ok`, `disagree` (beyond 3 standard errors) or `bound` (no exceedances).
    pub flag: String,
}

pub fn calibration_rows(z_grid: &[f64], n_grid: &[usize], trials: usize, seed: u64) -> Result<Vec<CalibrationRow>> {
    let mc = MonteCarlo::new(trials, seed);
    let mut rows = Vec::new();
    for &n in n_grid {
        let sample = mc.sample(n)?;
        for &z in z_grid {
            let analytic_sigma = global_significance_analytic(z, n)?;
            let est = sample.estimate(z);
            let flag = if est.bound {
                "bound"
            } else if (est.sigma - analytic_sigma).abs() > 3.0 * est.std_error {
                "disagree"
            } else {
                "ok"
            };
            rows.push(CalibrationRow {
                z,
                n,
                analytic_sigma,
                analytic_p: global_p_analytic(z, n)?,
                mc_sigma: est.sigma,
                mc_std_error: est.std_error,
                mc_p: est.p_global,
                exceedances: est.exceedances,
                flag: flag.into(),
            });
        }
    }
    Ok(rows)
}

pub fn cmd_calibrate(lm: &LoadedManifest) -> Result<CommandOutput> {
    let m = &lm.manifest;
    let rows = calibration_rows(&m.calibrate.z, &m.calibrate.n, m.significance.trials, m.significance.seed)?;
    let mut w = Writer::new(lm)?;
    w.with("calibration.csv", |b, sha| {
        use std::io::Write;
        writeln!(b, "# {HASH_KEY}={sha}").map_err(|e| Error::io("<report>", e))?;
        let mut c = csv::Writer::from_writer(b);
        for r in &rows {
            c.serialize(r).map_err(|e| Error::csv("<report>", e))?;
        }
        c.flush().map_err(|e| Error::io("<report>", e))
    })?;
    let mut s = String::new();
    let _ = writeln!(s, "trials: {}, seed: {}", m.significance.trials, m.significance.seed);
    let _ = writeln!(s, "{:>6} {:>6} {:>9} {:>11} {:>9} {:>8}  flag", "z", "N", "analytic", "p_global", "mc", "stderr");
    for r in &rows {
        let _ = writeln!(
            s,
            "{:>6.2} {:>6} {:>8.3}σ {:>11.3e} {:>8.3}σ {:>8.3}  {}",
            r.z, r.n, r.analytic_sigma, r.analytic_p, r.mc_sigma, r.mc_std_error, r.flag
        );
    }
    let disagreements = rows.iter().filter(|r| r.flag == "disagree").count();
    let _ = writeln!(s, "disagreements beyond 3 standard errors: {disagreements}");
    w.summary("calibration_summary.txt", &s)
}

pub fn cmd_synth(lm: &LoadedManifest) -> Result<CommandOutput> {
    let spec = lm
        .manifest
        .synth
        .as_ref()
        .ok_or_else(|| Error::Config("manifest has no [synth] section".into()))?;
    let synth = generate_synthetic(spec)?;
    let mut w = Writer::new(lm)?;
    let path = lm.dataset_path();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    save_dataset(&path, &synth.dataset, &[format!("{HASH_KEY}={}", lm.sha256)])?;
    w.out.files.push(path.clone());
    let coefficients: BTreeMap<&str, f64> = synth
        .dataset
        .feature_names
        .iter()
        .map(String::as_str)
        .zip(synth.coefficients.iter().copied())
        .collect();
    #[derive(Serialize)]
    struct Truth<'a> {
        intercept: f64,
        coefficients: BTreeMap<&'a str, f64>,
    }
    let truth = json_with_hash(
        &Truth {
            intercept: synth.intercept,
            coefficients,
        },
        &lm.sha256,
    )?;
    w.text("true_coefficients.json", &truth)?;
    let mut s = String::new();
    let _ = writeln!(s, "counties: {}", synth.dataset.n());
    let _ = writeln!(s, "features: {} ({} active)", spec.n_features, spec.n_active);
    let _ = writeln!(s, "dataset: {}", display_rel(&path, &lm.out_dir()));
    w.summary("synth_summary.txt", &s)
}

fn display_rel(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}
