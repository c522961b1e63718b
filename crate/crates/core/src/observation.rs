//! Observation model: expected daily counts derived from new infections,
//! and the negative-binomial count likelihood.
//!
//! Every observed stream is a scaled, lagged mixture of the daily
//! new-infection series. Counts are negative binomial with mean `mu` and
//! overdispersion `phi`, so `Var = mu + mu^2 / phi`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure, Error, Result};
use crate::series::{check_aligned, CountSeries, DateSeries};
use crate::transmission::Trajectory;

/// Longest supported infection-to-death lag.
pub const MAX_DELAY: usize = 60;
/// Lag support of low-latency feeds (lags `0..=FEED_LAGS`).
pub const FEED_LAGS: usize = 21;

const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Probabilities over integer lags `0..=L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayPmf(Vec<f64>);

impl DelayPmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        ensure!(!probs.is_empty(), InvalidArgument, "delay pmf is empty");
        ensure!(
            probs.len() <= MAX_DELAY + 1,
            InvalidArgument,
            "delay pmf longer than {} lags",
            MAX_DELAY
        );
        check_simplex(&probs, "delay pmf")?;
        Ok(Self(probs))
    }

    /// Gamma(mean, sd) discretised on day midpoints (`[l - 0.5, l + 0.5)`,
    /// lag 0 taking `[0, 0.5)`), truncated at `max_lag` and renormalised.
    pub fn discretized_gamma(mean: f64, sd: f64, max_lag: usize) -> Result<Self> {
        ensure!(mean > 0.0 && sd > 0.0, InvalidArgument, "gamma delay needs positive mean and sd");
        ensure!(max_lag <= MAX_DELAY, InvalidArgument, "max lag {max_lag} exceeds {MAX_DELAY}");
        let shape = (mean / sd).powi(2);
        let rate = mean / (sd * sd);
        let dist = GammaDist::new(shape, rate)
            .map_err(|e| Error::InvalidArgument(format!("gamma delay: {e}")))?;
        let mut probs = Vec::with_capacity(max_lag + 1);
        let mut prev = 0.0;
        for lag in 0..=max_lag {
            let upper = dist.cdf(lag as f64 + 0.5);
            probs.push(upper - prev);
            prev = upper;
        }
        let total: f64 = probs.iter().sum();
        ensure!(total > 0.0, InvalidArgument, "gamma delay has no mass below lag {max_lag}");
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self(probs))
    }

    /// A point mass at `lag`.
    pub fn point(lag: usize) -> Result<Self> {
        let mut probs = vec![0.0; lag + 1];
        probs[lag] = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn max_lag(&self) -> usize {
        self.0.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().enumerate().map(|(l, p)| l as f64 * p).sum()
    }
}

impl Default for DelayPmf {
    /// 21-day mean, 8-day sd infection-to-death delay.
    fn default() -> Self {
        Self::discretized_gamma(21.0, 8.0, MAX_DELAY).expect("default delay is valid")
    }
}

fn check_simplex(w: &[f64], what: &str) -> Result<()> {
    ensure!(
        w.iter().all(|p| p.is_finite() && *p >= 0.0),
        InvalidArgument,
        "{what} has negative or non-finite entries"
    );
    let total: f64 = w.iter().sum();
    ensure!(
        (total - 1.0).abs() <= SIMPLEX_TOLERANCE,
        InvalidArgument,
        "{what} sums to {total}, expected 1"
    );
    Ok(())
}

/// Link from new infections to a low-latency feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedLink {
    /// Reporting scale.
    pub kappa: f64,
    /// Simplex over lags `0..lag_weights.len()`.
    pub lag_weights: Vec<f64>,
    /// Negative-binomial overdispersion.
    pub phi: f64,
}

impl FeedLink {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.kappa >= 0.0 && self.kappa.is_finite(), InvalidArgument, "kappa must be >= 0");
        ensure!(self.phi > 0.0, InvalidArgument, "feed overdispersion must be > 0");
        ensure!(!self.lag_weights.is_empty(), InvalidArgument, "lag weights are empty");
        check_simplex(&self.lag_weights, "lag weights")
    }
}

/// Link from new infections to deaths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeathLink {
    /// Infection fatality ratio.
    pub ifr: f64,
    pub delay: DelayPmf,
    pub phi: f64,
}

impl DeathLink {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.ifr > 0.0 && self.ifr < 1.0, InvalidArgument, "ifr must lie in (0, 1)");
        ensure!(self.phi > 0.0, InvalidArgument, "death overdispersion must be > 0");
        Ok(())
    }
}

/// `scale * sum_l weights[l] * series[t - l]`, treating days before the
/// series start as zero.
pub fn convolve(series: &[f64], weights: &[f64], scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; series.len()];
    convolve_into(series, weights, scale, &mut out);
    out
}

pub(crate) fn convolve_into(series: &[f64], weights: &[f64], scale: f64, out: &mut [f64]) {
    for (t, slot) in out.iter_mut().enumerate() {
        let lags = weights.len().min(t + 1);
        let mut acc = 0.0;
        for (l, w) in weights[..lags].iter().enumerate() {
            acc += w * series[t - l];
        }
        *slot = scale * acc;
    }
}

/// Expected daily deaths.
pub fn death_mean(i_new: &DateSeries, link: &DeathLink) -> DateSeries {
    DateSeries::new(i_new.start, convolve(&i_new.values, link.delay.probs(), link.ifr))
}

/// Expected daily feed counts.
pub fn feed_mean(i_new: &DateSeries, link: &FeedLink) -> DateSeries {
    DateSeries::new(i_new.start, convolve(&i_new.values, &link.lag_weights, link.kappa))
}

fn check_negbin_args(mean: f64, phi: f64) -> Result<()> {
    ensure!(phi > 0.0 && !phi.is_nan(), InvalidArgument, "overdispersion must be > 0, got {phi}");
    ensure!(mean >= 0.0 && mean.is_finite(), InvalidArgument, "mean must be finite and >= 0, got {mean}");
    Ok(())
}

/// Negative-binomial log-pmf in the mean/overdispersion parameterisation.
///
/// A zero mean is a point mass at zero: `0` for `k = 0`, `-inf` otherwise.
pub fn negbin_logpmf(k: u64, mean: f64, phi: f64) -> Result<f64> {
    check_negbin_args(mean, phi)?;
    Ok(negbin_logpmf_unchecked(k, mean, phi))
}

/// `ln Gamma(k + phi) - ln Gamma(phi)`; summed directly for small `k` where
/// the difference of two large log-gammas would cancel.
fn log_rising_factorial(phi: f64, k: u64) -> f64 {
    if k <= 32 {
        (0..k).map(|j| (phi + j as f64).ln()).sum()
    } else {
        ln_gamma(k as f64 + phi) - ln_gamma(phi)
    }
}

pub(crate) fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

pub(crate) fn negbin_logpmf_unchecked(k: u64, mean: f64, phi: f64) -> f64 {
    negbin_logpmf_with_lnfact(k, ln_factorial(k), mean, phi)
}

pub(crate) fn negbin_logpmf_with_lnfact(k: u64, ln_k_fact: f64, mean: f64, phi: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let kf = k as f64;
    let log_total = (phi + mean).ln();
    log_rising_factorial(phi, k) - ln_k_fact - phi * (mean / phi).ln_1p()
        + kf * (mean.ln() - log_total)
}

/// Draws a count via the gamma-Poisson mixture.
pub fn negbin_sample<R: Rng + ?Sized>(rng: &mut R, mean: f64, phi: f64) -> Result<u64> {
    check_negbin_args(mean, phi)?;
    if mean == 0.0 {
        return Ok(0);
    }
    let gamma = Gamma::new(phi, mean / phi)
        .map_err(|e| Error::Numerical(format!("gamma mixing distribution: {e}")))?;
    let rate: f64 = gamma.sample(rng);
    if rate <= 0.0 {
        return Ok(0);
    }
    let poisson =
        Poisson::new(rate).map_err(|e| Error::Numerical(format!("poisson rate {rate}: {e}")))?;
    Ok(poisson.sample(rng) as u64)
}

/// How an observed stream links to new infections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Link {
    Deaths(DeathLink),
    Feed(FeedLink),
}

impl Link {
    pub fn expected(&self, i_new: &DateSeries) -> DateSeries {
        match self {
            Link::Deaths(l) => death_mean(i_new, l),
            Link::Feed(l) => feed_mean(i_new, l),
        }
    }

    pub fn phi(&self) -> f64 {
        match self {
            Link::Deaths(l) => l.phi,
            Link::Feed(l) => l.phi,
        }
    }
}

/// Sum of negative-binomial log-pmf terms over every observed day of every
/// stream. Missing days are skipped.
pub fn log_likelihood(observations: &[(&CountSeries, &Link)], traj: &Trajectory) -> Result<f64> {
    let mut total = 0.0;
    for (counts, link) in observations {
        total += stream_log_likelihood(counts, link, traj)?;
    }
    Ok(total)
}

/// One stream's contribution to [`log_likelihood`].
pub fn stream_log_likelihood(counts: &CountSeries, link: &Link, traj: &Trajectory) -> Result<f64> {
    check_aligned(counts, &traj.i_new, "observed series")?;
    ensure!(
        counts.len() <= traj.i_new.len(),
        Data,
        "observed series runs {} days past the trajectory",
        counts.len() - traj.i_new.len()
    );
    let mean = link.expected(&traj.i_new);
    let phi = link.phi();
    check_negbin_args(0.0, phi)?;
    let mut total = 0.0;
    for (k, mu) in counts.values.iter().zip(&mean.values) {
        if let Some(k) = k {
            total += negbin_logpmf_unchecked(*k, mu.max(0.0), phi);
        }
    }
    Ok(total)
}
