//! Sequence-aware evaluation of time-series anomaly detectors and a
//! nonparametric kNN-CUSUM detector with a calibrated false-alarm bound.
//!
//! - [`metrics`]: instance and point-adjusted P/R/F1, average detection delay,
//!   alarm precision, and the precision-delay area (SPD).
//! - [`randomguess`]: analytic and simulated Random Guess under point adjustment.
//! - [`forecast`]: AR residual model and attention building blocks.
//! - [`detector`]: kNN evidence, CUSUM, Lambert-W based threshold calibration.
//! - [`harness`]: datasets, synthetic streams, experiments and reports.

pub mod data;
pub mod detector;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod metrics;
pub mod randomguess;

pub use error::{Error, Result};
