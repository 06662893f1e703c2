//! Blinded fits, vote-flip injection, state margins and sensitivity sweeps.

mod blind;
mod inject;
mod summary;
mod sweep;

pub use blind::{blind_fit, evaluate, global_fit, BlindFit, BlindSpec, Evaluation, Scoring};
pub use inject::{inject_flips, run_injection_experiment, Direction, InjectionOutcome, InjectionSpec};
pub use summary::{counterfactual_winner, state_margin, state_summary, state_totals, StateSummary, Winner};
pub use sweep::{k_grid, sweep, StateSweep, SweepCurve, SweepOptions, SweepSample, DETECTION_SIGMA};
