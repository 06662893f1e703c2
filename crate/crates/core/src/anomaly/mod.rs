//! Residual scoring: distribution width, local significance, look-elsewhere
//! correction and ranking.

pub mod normal;
mod scores;
mod significance;
mod width;

pub use scores::{
    counting_noise_floor, local_significance, rank_anomalies, residuals, score_residuals,
    size_correlation, AnomalyScore, ResidualSet,
};
pub use significance::{
    global_p_analytic, global_significance_analytic, global_significance_mc,
    significance_registry, Analytic, ExtremeSample, GlobalEstimate, GlobalSignificance,
    GlobalSource, McConfig, McEstimate, MonteCarlo, SignificanceParams, SignificanceRegistry,
    DEFAULT_MC_SEED, DEFAULT_MC_TRIALS, MC_LOCAL_LIMIT, MIN_MC_TRIALS,
};
pub use width::{
    fit_width, width_registry, ClippedGaussian, RootMeanSquare, WidthEstimator, WidthFit,
    WidthParams, WidthRegistry, MIN_RESIDUALS,
};
