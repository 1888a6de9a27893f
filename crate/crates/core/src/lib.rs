//! Bayesian structural time-series toolkit for search-intensity data.
//!
//! The crate covers the whole pipeline: reading trends exports and official
//! series ([`series`]), assembling trend and seasonal state-space models
//! ([`model`]), exact Kalman inference ([`kalman`]), Gibbs sampling of the
//! variance and trend parameters ([`sampler`]), posterior-predictive
//! forecasts and one-step-error comparisons ([`forecast`]), and
//! counterfactual impact analysis ([`impact`]).
//!
//! Every random draw comes from a stream derived from one seed
//! ([`rng::SeedTree`]), so results are reproducible bit for bit.

pub mod error;
pub mod forecast;
pub mod impact;
pub mod kalman;
mod linalg;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod series;

pub use error::{Error, ErrorKind, Result};
pub use forecast::{
    analytic_predictive_variance, compare_models, error_curve, predict, ComparisonReport,
    ErrorCurve, ForecastResult,
};
pub use impact::{causal_impact, ImpactConfig, ImpactReport};
pub use kalman::{filter, sample_states, smooth, FilterResult, Smoothed};
pub use model::{
    build, simulate, ComponentSpec, Initialization, ModelParams, ModelSpec, SemilocalParams,
    StateSpace,
};
pub use rng::SeedTree;
pub use sampler::{
    fit, gibbs_fit, summarize, FitSummary, McmcConfig, PosteriorDraws, Priors, SummaryReport,
};
pub use series::{
    pearson_correlation, rank_queries, rescale_0_100, simple_average, to_annual, AnnualAggregate,
    Frequency, Period, QueryPanel, Series, TimeIndex,
};
