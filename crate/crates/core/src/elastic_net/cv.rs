use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{alpha_path, coordinate_descent, PenaltyConfig, SolverOptions};
use crate::data_model::{DesignMatrix, StandardizationParams};
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

pub const DEFAULT_L1_GRID: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
pub const DEFAULT_FOLD_SEED: u64 = 20_201_103;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub l1_grid: Vec<f64>,
    pub n_alphas: usize,
    pub eps: f64,
    pub folds: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Explicit alpha grid shared by every l1 ratio; replaces the computed
    /// path and is required when the grid contains l1_ratio = 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            l1_grid: DEFAULT_L1_GRID.to_vec(),
            n_alphas: 100,
            eps: 1e-4,
            folds: 5,
            seed: DEFAULT_FOLD_SEED,
            solver: SolverOptions::default(),
            alphas: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGridPoint {
    pub l1_ratio: f64,
    pub alpha: f64,
    pub mean_mse: f64,
    pub fold_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub grid: Vec<CvGridPoint>,
    pub selected: PenaltyConfig,
    pub folds: usize,
    pub seed: u64,
}

impl CvResult {
    pub fn selected_point(&self) -> &CvGridPoint {
        self.grid
            .iter()
            .find(|g| g.alpha == self.selected.alpha && g.l1_ratio == self.selected.l1_ratio)
            .expect("selected config is on the grid")
    }
}

/// Deterministic near-equal folds of a seeded row permutation.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config("cross-validation needs at least two folds".into()));
    }
    if n < k {
        return Err(Error::TooFewRows { rows: n, folds: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, Domain::FoldShuffle, 0));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// True when `a` should replace `b` as the selected configuration.
fn preferred(a: &CvGridPoint, b: &CvGridPoint) -> bool {
    if a.mean_mse != b.mean_mse {
        return a.mean_mse < b.mean_mse;
    }
    if a.alpha != b.alpha {
        return a.alpha > b.alpha;
    }
    a.l1_ratio > b.l1_ratio
}

fn fold_path_mse(
    raw: &DesignMatrix,
    y: &[f64],
    test: &[usize],
    l1_ratio: f64,
    alphas: &[f64],
    solver: &SolverOptions,
) -> Result<Vec<f64>> {
    let n = raw.n_rows();
    let mut is_test = vec![false; n];
    for &i in test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();

    let raw_train = raw.select_rows(&train);
    let params = StandardizationParams::fit(raw.names(), &raw_train)?;
    let x_train = params.transform(&raw_train)?;
    let x_test = params.transform(&raw.select_rows(test))?;
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();

    let mut warm: Option<Vec<f64>> = None;
    let mut mses = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let penalty = PenaltyConfig::new(alpha, l1_ratio)?;
        let sol = coordinate_descent(&x_train, &y_train, &penalty, solver, warm.as_deref(), false)?;
        let mut sse = 0.0;
        for (row, target) in y_test.iter().enumerate() {
            let mut pred = sol.intercept;
            for (j, b) in sol.coefficients.iter().enumerate() {
                if *b != 0.0 {
                    pred += b * x_test.get(row, j);
                }
            }
            sse += (target - pred) * (target - pred);
        }
        mses.push(sse / y_test.len() as f64);
        warm = Some(sol.coefficients);
    }
    Ok(mses)
}

/// K-fold cross-validation over `(l1_ratio, alpha)`.
///
/// `raw` holds unstandardized features; standardization is refit inside each
/// training fold. Each l1 ratio's alpha path is computed once on all rows and
/// shared by its folds, which walk it with warm starts.
pub fn cross_validate(raw: &DesignMatrix, y: &[f64], config: &CvConfig) -> Result<CvResult> {
    if config.l1_grid.is_empty() {
        return Err(Error::Config("empty l1 grid".into()));
    }
    if y.len() != raw.n_rows() {
        return Err(Error::Schema("target length differs from row count".into()));
    }
    let folds = fold_assignment(raw.n_rows(), config.folds, config.seed)?;

    let paths: Vec<Vec<f64>> = match &config.alphas {
        Some(alphas) => {
            if alphas.is_empty() {
                return Err(Error::Config("empty explicit alpha grid".into()));
            }
            for &l1 in &config.l1_grid {
                PenaltyConfig::new(alphas[0], l1)?;
            }
            let mut sorted = alphas.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            vec![sorted; config.l1_grid.len()]
        }
        None => {
            let params = StandardizationParams::fit(raw.names(), raw)?;
            let x = params.transform(raw)?;
            config
                .l1_grid
                .iter()
                .map(|&l1| alpha_path(&x, y, l1, config.n_alphas, config.eps))
                .collect::<Result<_>>()?
        }
    };

    let tasks: Vec<(usize, usize)> = (0..config.l1_grid.len())
        .flat_map(|l| (0..folds.len()).map(move |f| (l, f)))
        .collect();
    let results: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(l, f)| {
            fold_path_mse(raw, y, &folds[f], config.l1_grid[l], &paths[l], &config.solver)
        })
        .collect::<Result<_>>()?;

    let k = folds.len();
    let mut grid = Vec::new();
    for (l, &l1_ratio) in config.l1_grid.iter().enumerate() {
        for (a, &alpha) in paths[l].iter().enumerate() {
            let fold_mse: Vec<f64> = (0..k).map(|f| results[l * k + f][a]).collect();
            let mean_mse = fold_mse.iter().sum::<f64>() / k as f64;
            grid.push(CvGridPoint {
                l1_ratio,
                alpha,
                mean_mse,
                fold_mse,
            });
        }
    }
    let best = grid
        .iter()
        .skip(1)
        .fold(&grid[0], |best, g| if preferred(g, best) { g } else { best });
    let selected = PenaltyConfig::new(best.alpha, best.l1_ratio)?;
    Ok(CvResult {
        grid,
        selected,
        folds: k,
        seed: config.seed,
    })
}
