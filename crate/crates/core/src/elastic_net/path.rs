use crate::data_model::DesignMatrix;
use crate::error::{Error, Result};

/// Smallest alpha at which every coefficient is exactly zero.
///
/// Nudged up by a relative 1e-10 so the endpoint fit is zero under rounding.
pub fn alpha_max(x: &DesignMatrix, y: &[f64], l1_ratio: f64) -> Result<f64> {
    if !(l1_ratio > 0.0 && l1_ratio <= 1.0) {
        return Err(Error::Config(format!(
            "alpha path needs l1_ratio in (0, 1], got {l1_ratio}; supply an explicit alpha grid"
        )));
    }
    let n = x.n_rows() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let max_corr = (0..x.n_cols())
        .map(|j| {
            x.column(j)
                .iter()
                .zip(&centered)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs()
        })
        .fold(0.0f64, f64::max);
    Ok(max_corr / (n * l1_ratio) * (1.0 + 1e-10))
}

/// Geometric grid of `n_alphas` values from `alpha_max` down to `eps·alpha_max`.
pub fn alpha_path(
    x: &DesignMatrix,
    y: &[f64],
    l1_ratio: f64,
    n_alphas: usize,
    eps: f64,
) -> Result<Vec<f64>> {
    if n_alphas == 0 {
        return Err(Error::Config("n_alphas must be positive".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!("eps must be in (0, 1), got {eps}")));
    }
    let top = alpha_max(x, y, l1_ratio)?;
    if n_alphas == 1 {
        return Ok(vec![top]);
    }
    let step = eps.ln() / (n_alphas - 1) as f64;
    Ok((0..n_alphas)
        .map(|i| top * (step * i as f64).exp())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{generate_synthetic, standardize, SyntheticSpec};
    use crate::elastic_net::{coordinate_descent, PenaltyConfig, SolverOptions};

    fn synthetic() -> (DesignMatrix, Vec<f64>) {
        let out = generate_synthetic(&SyntheticSpec::new(200, 12, 3, 0.01, 11)).unwrap();
        let (x, _) = standardize(&out.dataset).unwrap();
        (x, out.dataset.target_shares())
    }

    #[test]
    fn single_alpha_is_max() {
        let (x, y) = synthetic();
        let path = alpha_path(&x, &y, 0.5, 1, 1e-4).unwrap();
        assert_eq!(path, vec![alpha_max(&x, &y, 0.5).unwrap()]);
    }

    #[test]
    fn geometric_and_bounded() {
        let (x, y) = synthetic();
        let path = alpha_path(&x, &y, 0.3, 100, 1e-4).unwrap();
        assert_eq!(path.len(), 100);
        assert!((path[99] / path[0] - 1e-4).abs() < 1e-12);
        let ratio = path[1] / path[0];
        for w in path.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_l1_ratio_rejected() {
        let (x, y) = synthetic();
        assert!(matches!(alpha_path(&x, &y, 0.0, 10, 1e-3), Err(Error::Config(_))));
    }

    #[test]
    fn endpoint_fit_is_all_zero() {
        let (x, y) = synthetic();
        for l1 in [0.1, 0.5, 1.0] {
            let top = alpha_max(&x, &y, l1).unwrap();
            let sol = coordinate_descent(
                &x,
                &y,
                &PenaltyConfig::new(top, l1).unwrap(),
                &SolverOptions::default(),
                None,
                false,
            )
            .unwrap();
            assert!(sol.coefficients.iter().all(|b| *b == 0.0), "l1={l1}");
        }
    }

    #[test]
    fn formula_matches_brute_force_threshold_scan() {
        let (x, y) = synthetic();
        let l1 = 0.7;
        let top = alpha_max(&x, &y, l1).unwrap();
        // scan a geometric grid spanning the threshold and find the first all-zero fit
        let grid: Vec<f64> = (0..200).map(|k| top * 0.5 * 1.01f64.powi(k)).collect();
        let first_zero = grid
            .iter()
            .position(|&a| {
                let sol = coordinate_descent(
                    &x,
                    &y,
                    &PenaltyConfig::new(a, l1).unwrap(),
                    &SolverOptions { tol: 1e-10, max_iter: 10_000 },
                    None,
                    false,
                )
                .unwrap();
                sol.coefficients.iter().all(|b| *b == 0.0)
            })
            .unwrap();
        let scanned = grid[first_zero];
        assert!(scanned >= top * (1.0 - 1e-9) && scanned <= top * 1.01 * (1.0 + 1e-9), "{scanned} vs {top}");
    }
}
