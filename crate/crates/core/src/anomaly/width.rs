use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

pub const MIN_RESIDUALS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthFit {
    /// Standard deviation about zero, share units.
    pub width: f64,
    pub clip_iterations: usize,
    pub n_used: usize,
}

/// Estimates the width of the residual distribution, centered at zero.
pub trait WidthEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit(&self, residuals: &[f64]) -> Result<WidthFit>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthParams {
    pub clip_sigma: f64,
    pub max_iterations: usize,
}

impl Default for WidthParams {
    fn default() -> Self {
        Self {
            clip_sigma: 3.0,
            max_iterations: 10,
        }
    }
}

fn check(residuals: &[f64]) -> Result<()> {
    if residuals.len() < MIN_RESIDUALS {
        return Err(Error::Config(format!(
            "width fit needs at least {MIN_RESIDUALS} residuals, got {}",
            residuals.len()
        )));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("residuals".into()));
    }
    if residuals.iter().all(|r| *r == 0.0) {
        return Err(Error::DegenerateWidth("all residuals are zero".into()));
    }
    Ok(())
}

/// RMS scaled by the largest magnitude, so equal-magnitude inputs are exact.
fn rms<'a>(values: impl Iterator<Item = &'a f64> + Clone) -> (f64, usize) {
    let peak = values.clone().fold(0.0f64, |m, r| m.max(r.abs()));
    if peak == 0.0 {
        return (0.0, values.count());
    }
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), r| {
        let u = r / peak;
        (s + u * u, c + 1)
    });
    (peak * (sum / count as f64).sqrt(), count)
}

/// Zero-centered RMS with iterative k·σ clipping until membership settles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedGaussian {
    pub clip_sigma: f64,
    pub max_iterations: usize,
}

impl Default for ClippedGaussian {
    fn default() -> Self {
        let p = WidthParams::default();
        Self {
            clip_sigma: p.clip_sigma,
            max_iterations: p.max_iterations,
        }
    }
}

impl WidthEstimator for ClippedGaussian {
    fn name(&self) -> &'static str {
        "clipped-gaussian"
    }

    fn fit(&self, residuals: &[f64]) -> Result<WidthFit> {
        check(residuals)?;
        let mut keep = vec![true; residuals.len()];
        let (mut width, mut n_used) = rms(residuals.iter());
        let mut iterations = 0;
        while iterations < self.max_iterations {
            iterations += 1;
            let bound = self.clip_sigma * width;
            let mut changed = false;
            for (k, r) in keep.iter_mut().zip(residuals) {
                let inside = r.abs() <= bound;
                changed |= *k != inside;
                *k = inside;
            }
            if !changed {
                break;
            }
            (width, n_used) = rms(residuals.iter().zip(&keep).filter(|(_, k)| **k).map(|(r, _)| r));
            if n_used == 0 || width == 0.0 {
                return Err(Error::DegenerateWidth(format!(
                    "clipping left {n_used} residuals of zero width"
                )));
            }
        }
        Ok(WidthFit {
            width,
            clip_iterations: iterations,
            n_used,
        })
    }
}

/// Plain zero-centered RMS over every residual.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RootMeanSquare;

impl WidthEstimator for RootMeanSquare {
    fn name(&self) -> &'static str {
        "rms"
    }

    fn fit(&self, residuals: &[f64]) -> Result<WidthFit> {
        check(residuals)?;
        let (width, n_used) = rms(residuals.iter());
        Ok(WidthFit {
            width,
            clip_iterations: 0,
            n_used,
        })
    }
}

pub type WidthRegistry = Registry<WidthParams, dyn WidthEstimator>;

pub fn width_registry() -> WidthRegistry {
    let mut reg = WidthRegistry::new("width");
    reg.register("clipped-gaussian", |p: &WidthParams| {
        Box::new(ClippedGaussian {
            clip_sigma: p.clip_sigma,
            max_iterations: p.max_iterations,
        })
    });
    reg.register("rms", |_: &WidthParams| Box::new(RootMeanSquare));
    reg
}

/// Default estimator: 3σ-clipped Gaussian width.
pub fn fit_width(residuals: &[f64]) -> Result<WidthFit> {
    ClippedGaussian::default().fit(residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_sample(n: usize, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, Domain::MonteCarlo, 999);
        (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn symmetric_pairs_are_exact() {
        let w = 0.0125;
        let r: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { w } else { -w }).collect();
        let fit = fit_width(&r).unwrap();
        assert_eq!(fit.width, w);
        assert_eq!(fit.n_used, 20);
        assert_eq!(fit.clip_iterations, 1);
    }

    #[test]
    fn recovers_generator_width() {
        let sample = normal_sample(3112, 0.015, 1);
        let fit = fit_width(&sample).unwrap();
        assert!((0.0145..=0.0155).contains(&fit.width), "{}", fit.width);
    }

    #[test]
    fn twenty_seed_suite_within_five_percent() {
        for seed in 0..20 {
            let fit = fit_width(&normal_sample(3112, 0.02, seed)).unwrap();
            assert!((fit.width / 0.02 - 1.0).abs() < 0.05, "seed {seed}: {}", fit.width);
        }
    }

    #[test]
    fn clipping_absorbs_an_outlier() {
        let mut sample = normal_sample(3112, 0.015, 1);
        let clean = fit_width(&sample).unwrap().width;
        let clean_rms = RootMeanSquare.fit(&sample).unwrap().width;
        sample.push(0.15);
        let dirty = fit_width(&sample).unwrap().width;
        let dirty_rms = RootMeanSquare.fit(&sample).unwrap().width;
        let shift = (dirty / clean - 1.0).abs();
        let rms_shift = (dirty_rms / clean_rms - 1.0).abs();
        assert!(shift < 0.02, "{shift}");
        assert!(rms_shift > shift);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fit_width(&[0.0; 12]), Err(Error::DegenerateWidth(_))));
        assert!(matches!(fit_width(&[0.1; 5]), Err(Error::Config(_))));
    }

    #[test]
    fn registry_builds_both() {
        let reg = width_registry();
        let sample = normal_sample(500, 1.0, 3);
        for name in ["clipped-gaussian", "rms"] {
            let est = reg.create(name, &WidthParams::default()).unwrap();
            assert_eq!(est.name(), name);
            assert!(est.fit(&sample).unwrap().width > 0.9);
        }
        assert!(reg.create("mad", &WidthParams::default()).is_err());
    }
}
