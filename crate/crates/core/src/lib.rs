//! Offline change-point detection for multivariate time-evolving data.
//!
//! A feed-forward ReLU regressor is trained on a sliding window of past rows
//! and scored on the rows that follow; the resulting test-error curve peaks
//! where the data-generating function switches. Peaks are located by a
//! thresholded range scan over a detection window.
//!
//! The crate also ships the synthetic generators (piecewise MLP regression,
//! VAR(q), nonlinear VAR, multi-species Lotka-Volterra) and the evaluation
//! metrics used to benchmark detectors against ground truth.

pub mod cli;
pub mod config;
pub mod data;
pub mod datagen;
pub mod detect;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod scan;

pub use config::{DetectionConfig, DetectionSettings, Regime, ThresholdSpec};
pub use data::SeriesDataset;
pub use error::{Error, Result};
