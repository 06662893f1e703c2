//! County-level election anomaly detection.
//!
//! Demographic features are regressed onto two-party vote share with an
//! Elastic Net; per-county residuals are scored against a fitted Gaussian
//! width and corrected for the number of counties examined. The
//! [`scenarios`] module runs blinded fits, vote-flip injections and
//! detection-sensitivity sweeps on top of that machinery.

pub mod anomaly;
pub mod data_model;
pub mod elastic_net;
pub mod error;
pub mod ingest;
pub mod registry;
pub mod rng;
pub mod scenarios;

pub use error::{Error, ErrorClass, Result};
