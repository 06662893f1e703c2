use serde::{Deserialize, Serialize};

use super::PenaltyConfig;
use crate::data_model::DesignMatrix;
use crate::error::{Error, Result};

/// `sign(z) * max(|z| - gamma, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence bound on the largest coefficient change in one sweep.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 10_000,
        }
    }
}

/// Raw coordinate-descent output on a standardized design.
#[derive(Debug, Clone, PartialEq)]
pub struct CdSolution {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Full sweeps performed.
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    /// Objective after every sweep, when requested.
    pub trace: Vec<f64>,
}

/// `(1/2n)·‖y − b₀ − Xβ‖² + α·ρ·‖β‖₁ + (α/2)·(1−ρ)·‖β‖²`.
pub fn objective(residuals: &[f64], beta: &[f64], penalty: &PenaltyConfig) -> f64 {
    let n = residuals.len() as f64;
    let loss = residuals.iter().map(|r| r * r).sum::<f64>() / (2.0 * n);
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    loss + penalty.alpha * penalty.l1_ratio * l1 + 0.5 * penalty.alpha * (1.0 - penalty.l1_ratio) * l2
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cyclic coordinate descent with exact univariate updates and an
/// unpenalized intercept refreshed after every sweep.
pub fn coordinate_descent(
    x: &DesignMatrix,
    y: &[f64],
    penalty: &PenaltyConfig,
    options: &SolverOptions,
    warm_start: Option<&[f64]>,
    record_trace: bool,
) -> Result<CdSolution> {
    penalty.validate()?;
    let n = x.n_rows();
    let p = x.n_cols();
    if y.len() != n {
        return Err(Error::Schema(format!("{} targets for {n} rows", y.len())));
    }
    if n < 2 {
        return Err(Error::Config("fitting needs at least two rows".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression target".into()));
    }
    if (0..p).any(|j| x.column(j).iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("design matrix".into()));
    }

    let nf = n as f64;
    let l1_penalty = penalty.alpha * penalty.l1_ratio;
    let l2_penalty = penalty.alpha * (1.0 - penalty.l1_ratio);
    let col_sq: Vec<f64> = (0..p).map(|j| dot(x.column(j), x.column(j)) / nf).collect();

    let mut beta = match warm_start {
        Some(w) if w.len() == p => w.to_vec(),
        Some(w) => {
            return Err(Error::Schema(format!("warm start has {} entries, expected {p}", w.len())))
        }
        None => vec![0.0; p],
    };
    let mut residual: Vec<f64> = y.to_vec();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (r, xv) in residual.iter_mut().zip(x.column(j)) {
                *r -= xv * b;
            }
        }
    }
    let mut intercept = residual.iter().sum::<f64>() / nf;
    for r in residual.iter_mut() {
        *r -= intercept;
    }

    let mut trace = Vec::new();
    let mut previous = objective(&residual, &beta, penalty);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iter {
        iterations += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let column = x.column(j);
            let old = beta[j];
            let rho = dot(column, &residual) / nf + col_sq[j] * old;
            let new = soft_threshold(rho, l1_penalty) / (col_sq[j] + l2_penalty);
            let delta = new - old;
            if delta != 0.0 {
                for (r, xv) in residual.iter_mut().zip(column) {
                    *r -= xv * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let shift = residual.iter().sum::<f64>() / nf;
        if shift != 0.0 {
            intercept += shift;
            for r in residual.iter_mut() {
                *r -= shift;
            }
        }

        if record_trace || cfg!(debug_assertions) {
            let current = objective(&residual, &beta, penalty);
            debug_assert!(
                current <= previous + 1e-10 * previous.abs().max(1e-12),
                "objective rose from {previous} to {current}"
            );
            if record_trace {
                trace.push(current);
            }
            previous = current;
        }
        if max_change < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "coordinate descent stopped after {} sweeps without reaching tol {}",
            options.max_iter,
            options.tol
        );
    }

    Ok(CdSolution {
        objective: objective(&residual, &beta, penalty),
        coefficients: beta,
        intercept,
        iterations,
        converged,
        trace,
    })
}
