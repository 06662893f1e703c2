//! Look-elsewhere correction of per-county significances.
//!
//! Both strategies answer the same question: how likely is it that the most
//! extreme of `n` independent standard-normal draws is at least `|z|`? The
//! analytic route evaluates `1 − (1 − p_local)^n` in closed form; the Monte
//! Carlo route simulates the extreme directly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normal::{normal_pdf, sigma_from_two_sided_p, two_sided_p};
use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::rng::{substream, Domain};

/// Local significance above which Monte Carlo estimates defer to the
/// closed form; the simulation cannot resolve such tails.
pub const MC_LOCAL_LIMIT: f64 = 6.0;
pub const MIN_MC_TRIALS: usize = 1_000;
pub const DEFAULT_MC_TRIALS: usize = 100_000;
pub const DEFAULT_MC_SEED: u64 = 3_112;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalSource {
    Analytic,
    MonteCarlo,
    /// |local| beyond the simulated range; closed form reported instead.
    BeyondMcRange,
    /// No simulated extreme reached |z|; closed form reported instead.
    McBound,
}

impl GlobalSource {
    pub fn as_str(self) -> &'static str {
        match self {
            GlobalSource::Analytic => "analytic",
            GlobalSource::MonteCarlo => "monte-carlo",
            GlobalSource::BeyondMcRange => "beyond-mc-range",
            GlobalSource::McBound => "mc-bound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            GlobalSource::Analytic,
            GlobalSource::MonteCarlo,
            GlobalSource::BeyondMcRange,
            GlobalSource::McBound,
        ]
        .into_iter()
        .find(|g| g.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalEstimate {
    /// Non-negative global significance in σ.
    pub sigma: f64,
    pub p_global: f64,
    /// Monte Carlo standard error of `sigma`, when simulated.
    pub std_error: Option<f64>,
    pub source: GlobalSource,
}

/// A look-elsewhere correction strategy.
pub trait GlobalSignificance: Send + Sync {
    fn name(&self) -> &'static str;
    /// Global significance of local `z` among `n` examined counties.
    fn assess(&self, local_z: f64, n: usize) -> Result<GlobalEstimate>;
}

fn check_inputs(local_z: f64, n: usize) -> Result<()> {
    if !local_z.is_finite() {
        return Err(Error::NonFinite("local significance".into()));
    }
    if n == 0 {
        return Err(Error::Config("look-elsewhere correction needs n >= 1".into()));
    }
    Ok(())
}

/// ln of the two-sided tail probability, valid where the probability
/// itself underflows.
fn ln_two_sided_p(z: f64) -> f64 {
    let z = z.abs();
    if z < 37.0 {
        return two_sided_p(z).ln();
    }
    // Mills-ratio asymptotic series: 2φ(z)/z · (1 − 1/z² + 3/z⁴)
    let z2 = z * z;
    (2.0f64).ln() - 0.5 * z2 - 0.5 * (2.0 * std::f64::consts::PI).ln() - z.ln()
        + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
}

fn sigma_from_ln_p(ln_p: f64) -> f64 {
    if ln_p > (1e-300f64).ln() {
        return sigma_from_two_sided_p(ln_p.exp());
    }
    let (mut lo, mut hi) = (30.0, 1e4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ln_two_sided_p(mid) > ln_p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form global significance:
/// `p_global = 1 − (1 − 2·(1 − Φ(|z|)))^n`, converted back two-sided.
pub fn global_significance_analytic(local_z: f64, n: usize) -> Result<f64> {
    check_inputs(local_z, n)?;
    let z = local_z.abs();
    if n == 1 {
        return Ok(z);
    }
    let p_local = two_sided_p(z);
    let sigma = if p_local > 1e-280 {
        let p_global = -((n as f64) * (-p_local).ln_1p()).exp_m1();
        sigma_from_two_sided_p(p_global)
    } else {
        sigma_from_ln_p(ln_two_sided_p(z) + (n as f64).ln())
    };
    Ok(sigma.min(z))
}

/// Global p-value of the closed form.
pub fn global_p_analytic(local_z: f64, n: usize) -> Result<f64> {
    check_inputs(local_z, n)?;
    let p_local = two_sided_p(local_z);
    Ok(-((n as f64) * (-p_local).ln_1p()).exp_m1())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Analytic;

impl GlobalSignificance for Analytic {
    fn name(&self) -> &'static str {
        "analytic"
    }

    fn assess(&self, local_z: f64, n: usize) -> Result<GlobalEstimate> {
        Ok(GlobalEstimate {
            sigma: global_significance_analytic(local_z, n)?,
            p_global: global_p_analytic(local_z, n)?,
            std_error: None,
            source: GlobalSource::Analytic,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: usize,
    pub n_counties: usize,
    pub seed: u64,
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.trials < MIN_MC_TRIALS {
            return Err(Error::Config(format!(
                "Monte Carlo needs at least {MIN_MC_TRIALS} trials, got {}",
                self.trials
            )));
        }
        if self.n_counties == 0 {
            return Err(Error::Config("Monte Carlo needs n_counties >= 1".into()));
        }
        Ok(())
    }
}

/// Sorted per-trial maxima of `n` absolute standard-normal draws.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremeSample {
    sorted: Vec<f64>,
}

impl ExtremeSample {
    /// Simulates `config.trials` trials; trial `t` draws from its own
    /// substream, so the sample is independent of the thread schedule.
    pub fn simulate(config: &McConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_counties;
        let mut sorted: Vec<f64> = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = substream(config.seed, Domain::MonteCarlo, t);
                (0..n)
                    .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn trials(&self) -> usize {
        self.sorted.len()
    }

    /// Trials whose extreme is at least `threshold`.
    pub fn exceedances(&self, threshold: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&x| x < threshold)
    }

    pub fn estimate(&self, local_z: f64) -> McEstimate {
        let trials = self.trials() as f64;
        let count = self.exceedances(local_z.abs());
        let p = count as f64 / trials;
        let p_std_error = (p * (1.0 - p)).max(1.0 / trials).sqrt() / trials.sqrt();
        let sigma = sigma_from_two_sided_p(p);
        let std_error = if sigma.is_finite() {
            p_std_error / (2.0 * normal_pdf(sigma))
        } else {
            f64::INFINITY
        };
        McEstimate {
            p_global: p,
            sigma,
            std_error,
            p_std_error,
            exceedances: count,
            bound: count == 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_global: f64,
    pub sigma: f64,
    /// Standard error of `sigma` by the delta method.
    pub std_error: f64,
    pub p_std_error: f64,
    pub exceedances: usize,
    /// No trial reached |z|: `p_global` is only bounded above by ~1/trials.
    pub bound: bool,
}

/// Monte Carlo global significance of one local z.
pub fn global_significance_mc(local_z: f64, config: &McConfig) -> Result<McEstimate> {
    check_inputs(local_z, config.n_counties)?;
    Ok(ExtremeSample::simulate(config)?.estimate(local_z))
}

/// Monte Carlo strategy; extreme samples are cached per county count.
#[derive(Debug)]
pub struct MonteCarlo {
    trials: usize,
    seed: u64,
    cache: Mutex<HashMap<usize, Arc<ExtremeSample>>>,
}

impl MonteCarlo {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn sample(&self, n: usize) -> Result<Arc<ExtremeSample>> {
        if let Some(s) = self.cache.lock().expect("cache lock").get(&n) {
            return Ok(Arc::clone(s));
        }
        let sample = Arc::new(ExtremeSample::simulate(&McConfig {
            trials: self.trials,
            n_counties: n,
            seed: self.seed,
        })?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(n, Arc::clone(&sample));
        Ok(sample)
    }
}

impl GlobalSignificance for MonteCarlo {
    fn name(&self) -> &'static str {
        "monte-carlo"
    }

    fn assess(&self, local_z: f64, n: usize) -> Result<GlobalEstimate> {
        check_inputs(local_z, n)?;
        let z = local_z.abs();
        let fallback = |source| -> Result<GlobalEstimate> {
            Ok(GlobalEstimate {
                sigma: global_significance_analytic(z, n)?,
                p_global: global_p_analytic(z, n)?,
                std_error: None,
                source,
            })
        };
        if z > MC_LOCAL_LIMIT {
            return fallback(GlobalSource::BeyondMcRange);
        }
        let est = self.sample(n)?.estimate(z);
        if est.bound {
            return fallback(GlobalSource::McBound);
        }
        Ok(GlobalEstimate {
            sigma: est.sigma.min(z),
            p_global: est.p_global,
            std_error: Some(est.std_error),
            source: GlobalSource::MonteCarlo,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignificanceParams {
    pub trials: usize,
    pub seed: u64,
}

impl Default for SignificanceParams {
    fn default() -> Self {
        Self {
            trials: DEFAULT_MC_TRIALS,
            seed: DEFAULT_MC_SEED,
        }
    }
}

pub type SignificanceRegistry = Registry<SignificanceParams, dyn GlobalSignificance>;

pub fn significance_registry() -> SignificanceRegistry {
    let mut reg = SignificanceRegistry::new("significance");
    reg.register("analytic", |_: &SignificanceParams| Box::new(Analytic));
    reg.register("monte-carlo", |p: &SignificanceParams| {
        Box::new(MonteCarlo::new(p.trials, p.seed))
    });
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_pairs() {
        for (z, expected) in [(5.5, 3.8), (5.3, 3.6), (5.1, 3.3), (-5.4, 3.7)] {
            let s = global_significance_analytic(z, 3112).unwrap();
            assert!((s - expected).abs() <= 0.05, "{z} -> {s}");
        }
    }

    #[test]
    fn no_correction_for_single_county() {
        assert_eq!(global_significance_analytic(-2.7, 1).unwrap(), 2.7);
    }

    #[test]
    fn zero_is_zero() {
        assert_eq!(global_significance_analytic(0.0, 3112).unwrap(), 0.0);
        let mc = MonteCarlo::new(1_000, 1).assess(0.0, 50).unwrap();
        assert_eq!((mc.sigma, mc.p_global), (0.0, 1.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(global_significance_analytic(f64::NAN, 10).is_err());
        assert!(global_significance_analytic(1.0, 0).is_err());
        let cfg = McConfig {
            trials: 999,
            n_counties: 10,
            seed: 0,
        };
        assert!(global_significance_mc(1.0, &cfg).is_err());
    }

    #[test]
    fn extreme_tails_stay_finite() {
        let s = global_significance_analytic(45.0, 3112).unwrap();
        assert!(s.is_finite() && s < 45.0 && s > 44.0, "{s}");
        let near = global_significance_analytic(37.5, 3112).unwrap();
        let below = global_significance_analytic(36.9, 3112).unwrap();
        assert!(near > below);
    }

    #[test]
    fn mc_is_thread_independent() {
        let cfg = McConfig {
            trials: 2_000,
            n_counties: 40,
            seed: 9,
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(6).build().unwrap();
        let a = one.install(|| ExtremeSample::simulate(&cfg).unwrap());
        let b = many.install(|| ExtremeSample::simulate(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn mc_beyond_range_defers() {
        let mc = MonteCarlo::new(1_000, 1);
        let est = mc.assess(7.5, 100).unwrap();
        assert_eq!(est.source, GlobalSource::BeyondMcRange);
        assert_eq!(est.sigma, global_significance_analytic(7.5, 100).unwrap());
        let bound = mc.assess(5.9, 100).unwrap();
        assert_eq!(bound.source, GlobalSource::McBound);
    }

    proptest! {
        #[test]
        fn monotone_in_z_and_n(z in 0.0f64..12.0, dz in 0.001f64..1.0, n in 2usize..5000, dn in 1usize..5000) {
            let base = global_significance_analytic(z, n).unwrap();
            prop_assert!(global_significance_analytic(z + dz, n).unwrap() >= base);
            prop_assert!(global_significance_analytic(z, n + dn).unwrap() <= base);
            prop_assert!(base <= z);
        }
    }
}
