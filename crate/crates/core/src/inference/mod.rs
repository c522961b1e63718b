//! Posterior sampling, diagnostics and posterior-predictive forecasting.

pub mod diagnostics;
pub mod export;
pub mod forecast;
pub mod model;
pub mod params;
pub mod priors;
pub mod sampler;
pub mod warmstart;

pub use diagnostics::{ess, rhat};
pub use forecast::{posterior_predictive, ForecastResult, DEFAULT_HORIZON};
pub use model::{FitData, GaussianTarget, LogDensity, ObservedFeed, PosteriorModel};
pub use params::{ModelParams, ParamLayout};
pub use priors::{Prior, Priors};
pub use sampler::{
    run_chain, run_chains, AdaptationConfig, ChainDraws, CovarianceKind, PosteriorSamples, SamplerConfig,
};
