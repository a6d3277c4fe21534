//! Random forest regression with distribution-aware prediction intervals.
//!
//! A fitted forest assigns every query point a weight vector over the
//! training rows (rows sharing leaves with the query get more weight), which
//! induces a discrete distribution over training target values. Intervals
//! are then cut from that distribution in one of two ways: the classical
//! central range between two quantiles, or the narrowest range that holds
//! the required probability mass. The narrow variant adapts to skewed and
//! peaked target distributions, where central ranges waste width on a thin
//! tail.
//!
//! ```
//! use forest_intervals::dataset;
//! use forest_intervals::forest::{fit_forest, ForestConfig};
//! use forest_intervals::interval::{predict_interval, IntervalMethod};
//! use forest_intervals::synthetic::{sine_task, NoiseKind};
//!
//! let data = sine_task(300, NoiseKind::Gaussian { std: 0.3 }, 7).unwrap();
//! let (train, _test) = dataset::split(&data, 0.2, 7).unwrap();
//! let config = ForestConfig { n_trees: 50, ..ForestConfig::default() };
//! let forest = fit_forest(&train, &config, 42).unwrap();
//!
//! let pred = predict_interval(&forest, &[0.5, -1.0], 0.1, IntervalMethod::Hdi).unwrap();
//! assert!(pred.lower_raw < pred.upper_raw);
//! assert!(pred.standardized.estimated_coverage >= 0.9 - 1e-12);
//! ```

pub mod dataset;
pub mod error;
pub mod eval;
pub mod forest;
pub mod interval;
mod kahan;
pub mod model;
pub mod selfcheck;
pub mod synthetic;
pub mod weights;

pub use error::{Error, Result};
