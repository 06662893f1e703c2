//! Run manifests: one TOML file fixing every input, grid and seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use flipscan_core::anomaly::{
    significance_registry, width_registry, GlobalSignificance, SignificanceParams, WidthEstimator,
    WidthParams, DEFAULT_MC_SEED, DEFAULT_MC_TRIALS,
};
use flipscan_core::data_model::SyntheticSpec;
use flipscan_core::elastic_net::{CvConfig, SolverOptions, DEFAULT_FOLD_SEED, DEFAULT_L1_GRID};
use flipscan_core::ingest::{CleaningOptions, ParseOptions, SourceId, DEFAULT_MOE_PATTERN};
use flipscan_core::scenarios::{BlindSpec, Direction, InjectionSpec, SweepOptions};
use flipscan_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_year")]
    pub target_year: u16,
    /// Canonical dataset file read by the analysis commands; defaults to
    /// `<out>/dataset.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Output directory. Not part of the manifest hash.
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

fn default_year() -> u16 {
    2020
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            target_year: default_year(),
            dataset: None,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableInput {
    pub source: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectionInput {
    pub year: u16,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsSection {
    #[serde(default)]
    pub demographics: Vec<TableInput>,
    #[serde(default)]
    pub elections: Vec<ElectionInput>,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    #[serde(default = "default_moe")]
    pub moe_pattern: String,
}

fn default_delimiter() -> String {
    ",".into()
}

fn default_moe() -> String {
    DEFAULT_MOE_PATTERN.into()
}

impl Default for InputsSection {
    fn default() -> Self {
        Self {
            demographics: Vec::new(),
            elections: Vec::new(),
            delimiter: default_delimiter(),
            moe_pattern: default_moe(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub l1_grid: Vec<f64>,
    pub n_alphas: usize,
    pub eps: f64,
    pub folds: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
}

impl Default for CvSection {
    fn default() -> Self {
        let solver = SolverOptions::default();
        Self {
            l1_grid: DEFAULT_L1_GRID.to_vec(),
            n_alphas: 100,
            eps: 1e-4,
            folds: 5,
            seed: DEFAULT_FOLD_SEED,
            tol: solver.tol,
            max_iter: solver.max_iter,
            alphas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignificanceSection {
    pub method: String,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SignificanceSection {
    fn default() -> Self {
        Self {
            method: "monte-carlo".into(),
            trials: DEFAULT_MC_TRIALS,
            seed: DEFAULT_MC_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WidthSection {
    pub method: String,
    pub clip_sigma: f64,
    pub max_iterations: usize,
}

impl Default for WidthSection {
    fn default() -> Self {
        let p = WidthParams::default();
        Self {
            method: "clipped-gaussian".into(),
            clip_sigma: p.clip_sigma,
            max_iterations: p.max_iterations,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlindSection {
    pub train_states: Vec<String>,
    pub eval_states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectSection {
    pub fips: String,
    pub k: u64,
    pub direction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub states: Vec<String>,
    pub resolution: u64,
    pub detection_sigma: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let o = SweepOptions::default();
        Self {
            states: Vec::new(),
            resolution: o.resolution,
            detection_sigma: o.detection_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub z: Vec<f64>,
    pub n: Vec<usize>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self {
            z: vec![2.0, 3.0, 4.0, 5.0, 5.1, 5.3, 5.5],
            n: vec![1, 100, 381, 3112],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub top_n: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { top_n: 10 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub inputs: InputsSection,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub significance: SignificanceSection,
    #[serde(default)]
    pub width: WidthSection,
    #[serde(default)]
    pub blind: BlindSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject: Option<InjectSection>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SyntheticSpec>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

/// A parsed manifest with its base directory and content hash.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub base_dir: PathBuf,
    pub sha256: String,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    /// `--seed` replaces every seed: CV folds, Monte Carlo and generator.
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(dir) = &overrides.out_dir {
            self.run.out_dir = Some(dir.clone());
        }
        if let Some(t) = overrides.trials {
            self.significance.trials = t;
        }
        if let Some(s) = overrides.seed {
            self.cv.seed = s;
            self.significance.seed = s;
            if let Some(synth) = &mut self.synth {
                synth.seed = s;
            }
        }
    }

    /// SHA-256 of the canonical serialization, excluding the output directory.
    pub fn sha256(&self) -> String {
        let canonical = toml::to_string(self).expect("manifest serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn cv_config(&self) -> CvConfig {
        let c = &self.cv;
        CvConfig {
            l1_grid: c.l1_grid.clone(),
            n_alphas: c.n_alphas,
            eps: c.eps,
            folds: c.folds,
            seed: c.seed,
            solver: SolverOptions {
                tol: c.tol,
                max_iter: c.max_iter,
            },
            alphas: c.alphas.clone(),
        }
    }

    pub fn significance(&self) -> Result<Box<dyn GlobalSignificance>> {
        let s = &self.significance;
        significance_registry().create(
            &s.method,
            &SignificanceParams {
                trials: s.trials,
                seed: s.seed,
            },
        )
    }

    pub fn width_estimator(&self) -> Result<Box<dyn WidthEstimator>> {
        let w = &self.width;
        width_registry().create(
            &w.method,
            &WidthParams {
                clip_sigma: w.clip_sigma,
                max_iterations: w.max_iterations,
            },
        )
    }

    pub fn blind_spec(&self) -> Result<BlindSpec> {
        BlindSpec::new(&self.blind.train_states, &self.blind.eval_states, self.cv_config())
    }

    pub fn injection(&self) -> Result<InjectionSpec> {
        let i = self
            .inject
            .as_ref()
            .ok_or_else(|| Error::Config("manifest has no [inject] section".into()))?;
        InjectionSpec::new(&i.fips, i.k, i.direction.parse::<Direction>()?)
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            resolution: self.sweep.resolution,
            detection_sigma: self.sweep.detection_sigma,
        }
    }

    pub fn parse_options(&self) -> Result<ParseOptions> {
        let d = self.inputs.delimiter.as_bytes();
        if d.len() != 1 {
            return Err(Error::Config(format!("delimiter must be one byte, got {:?}", self.inputs.delimiter)));
        }
        Ok(ParseOptions {
            delimiter: d[0],
            fips_column: None,
        })
    }

    pub fn cleaning_options(&self) -> Result<CleaningOptions> {
        CleaningOptions::with_pattern(&self.inputs.moe_pattern)
    }

    pub fn demographic_sources(&self) -> Result<Vec<(SourceId, &Path)>> {
        self.inputs
            .demographics
            .iter()
            .map(|t| Ok((t.source.parse::<SourceId>()?, t.path.as_path())))
            .collect()
    }
}

impl LoadedManifest {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut manifest = Manifest::parse(&text)?;
        manifest.apply(overrides);
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let sha256 = manifest.sha256();
        Ok(Self {
            manifest,
            base_dir,
            sha256,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        match &self.manifest.run.out_dir {
            Some(d) => self.resolve(d),
            None => self.base_dir.join("out"),
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        match &self.manifest.run.dataset {
            Some(d) => self.resolve(d),
            None => self.out_dir().join("dataset.csv"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_takes_defaults() {
        let m = Manifest::parse("").unwrap();
        assert_eq!(m.cv_config(), CvConfig::default());
        assert_eq!(m.significance.trials, DEFAULT_MC_TRIALS);
        assert_eq!(m.run.target_year, 2020);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Manifest::parse("[cv]\nfold = 3\n").is_err());
    }

    #[test]
    fn hash_tracks_content_not_out_dir() {
        let mut a = Manifest::parse("[run]\nout_dir = \"a\"\n").unwrap();
        let b = Manifest::parse("[run]\nout_dir = \"b\"\n").unwrap();
        assert_eq!(a.sha256(), b.sha256());
        a.apply(&Overrides {
            trials: Some(5000),
            ..Overrides::default()
        });
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
    }

    #[test]
    fn seed_override_reaches_every_seed() {
        let mut m = Manifest::parse("[synth]\nn_counties = 10\nn_features = 2\nn_active = 1\nnoise_sd = 0.01\nseed = 1\n").unwrap();
        m.apply(&Overrides {
            seed: Some(99),
            ..Overrides::default()
        });
        assert_eq!((m.cv.seed, m.significance.seed, m.synth.unwrap().seed), (99, 99, 99));
    }

    #[test]
    fn strategies_resolve_by_name() {
        let mut m = Manifest::parse("[significance]\nmethod = \"analytic\"\n").unwrap();
        assert_eq!(m.significance().unwrap().name(), "analytic");
        m.width.method = "median".into();
        assert!(matches!(m.width_estimator(), Err(Error::UnknownStrategy { .. })));
    }
}
