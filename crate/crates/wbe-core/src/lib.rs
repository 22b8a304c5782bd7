//! Data-modelling toolkit for SARS-CoV-2 wastewater surveillance signals.
//!
//! The crate covers the full path from raw treatment-plant measurements to a
//! forecastable epidemic indicator:
//!
//! * [`preprocess`] — biomarker normalization to gene copies per person
//!   equivalent per day, flow and biomarker outlier screening,
//! * [`series`] — scattered/regular series types with resampling,
//!   interpolation and differencing,
//! * [`smoothing`] — centered moving average and LOESS with data-driven
//!   parameter selection,
//! * [`regression`] — lag analysis, multivariate linear and polynomial
//!   least squares with full diagnostics,
//! * [`forecast`] — SES and AR(p) forecasting with stationarity transforms
//!   and a walk-forward post-sample harness,
//! * [`metrics`] — RMSE, R², MSIM, Pearson r, AIC and LOOCV,
//! * [`synthetic`] — a seeded scenario generator for oracle-based testing.
//!
//! All numeric code is generic over the scalar type through [`num::Real`]
//! (`f32` or `f64`); the aliases below pin the common `f64` case.

#![forbid(unsafe_code)]

pub mod dist;
pub mod error;
pub mod forecast;
pub mod linalg;
pub mod metrics;
pub mod num;
pub mod preprocess;
pub mod regression;
pub mod rng;
pub mod series;
pub mod smoothing;
pub mod synthetic;

pub use error::{Error, Result};
pub use num::Real;
pub use series::TimePoint;

/// `f64` aliases for the common case; the CLI and most callers use these.
pub type ScatteredSeries = series::ScatteredSeries<f64>;
pub type RegularSeries = series::RegularSeries<f64>;
pub type Sample = preprocess::Sample<f64>;
pub type BiomarkerConfig = preprocess::BiomarkerConfig<f64>;
pub type NormalizedPoint = preprocess::NormalizedPoint<f64>;
pub type RegressionFit = regression::RegressionFit<f64>;
pub type LagTable = regression::LagTable<f64>;
pub type EvaluationReport = forecast::EvaluationReport<f64>;
pub type Scenario = synthetic::Scenario<f64>;
