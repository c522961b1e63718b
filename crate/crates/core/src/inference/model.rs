//! Log-posterior of the fused SEIRD model and the density interface the
//! sampler runs against.

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{ModelParams, ParamLayout};
use super::priors::{dirichlet_ln_pdf, normal_ln_pdf, Prior, Priors};
use crate::error::{ensure, Error, Result};
use crate::observation::{
    convolve_into, ln_factorial, negbin_logpmf_with_lnfact, DelayPmf, FEED_LAGS,
};
use crate::series::CountSeries;
use crate::transmission::simulate;

/// An unnormalised log-density over an unconstrained real vector.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// `-inf` for points where the density cannot be evaluated.
    fn log_density(&self, u: &[f64]) -> f64;

    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Names of the values returned by [`LogDensity::constrain_draw`].
    fn param_names(&self) -> Vec<String>;

    /// The stored (constrained) representation of an unconstrained point.
    fn constrain_draw(&self, u: &[f64]) -> Result<Vec<f64>>;
}

/// Independent Gaussian target, used to check the sampler against known
/// moments.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl GaussianTarget {
    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            sd: vec![1.0; dim],
        }
    }
}

impl LogDensity for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        u.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((x, m), s)| normal_ln_pdf(*x, *m, *s))
            .sum()
    }

    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.sd)
            .map(|(m, s)| m + s * rng.random_range(-2.0..2.0))
            .collect()
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }

    fn constrain_draw(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(u.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedFeed {
    pub name: String,
    pub counts: CountSeries,
}

/// Aligned observations for one region, ready for fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitData {
    pub epoch: NaiveDate,
    pub population: f64,
    pub deaths: CountSeries,
    pub feeds: Vec<ObservedFeed>,
    pub delay: DelayPmf,
    /// Number of lag weights per feed.
    pub feed_lags: usize,
}

impl FitData {
    pub fn new(epoch: NaiveDate, population: f64, deaths: CountSeries) -> Self {
        Self {
            epoch,
            population,
            deaths,
            feeds: Vec::new(),
            delay: DelayPmf::default(),
            feed_lags: FEED_LAGS + 1,
        }
    }

    pub fn with_feed(mut self, name: impl Into<String>, counts: CountSeries) -> Self {
        self.feeds.push(ObservedFeed {
            name: name.into(),
            counts,
        });
        self
    }

    /// Modelled days: the longest observed series, at least one.
    pub fn n_days(&self) -> usize {
        self.feeds
            .iter()
            .map(|f| f.counts.len())
            .chain(std::iter::once(self.deaths.len()))
            .max()
            .unwrap_or(0)
            .max(1)
    }

    pub fn n_knots(&self) -> usize {
        self.n_days().div_ceil(7)
    }

    pub fn forecast_start(&self) -> NaiveDate {
        self.epoch + chrono::Duration::days(self.n_days() as i64)
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            n_knots: self.n_knots(),
            feed_names: self.feeds.iter().map(|f| f.name.clone()).collect(),
            feed_lags: self.feed_lags,
            population: self.population,
            delay: self.delay.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.population > 0.0, Config, "population must be positive");
        ensure!(self.feed_lags >= 1, Config, "feeds need at least one lag weight");
        for (name, s) in std::iter::once(("deaths", &self.deaths))
            .chain(self.feeds.iter().map(|f| (f.name.as_str(), &f.counts)))
        {
            ensure!(
                s.start == self.epoch,
                Data,
                "{name} series starts {} but the epoch is {}",
                s.start,
                self.epoch
            );
        }
        Ok(())
    }
}

/// Observed day index, count and cached `ln k!`.
#[derive(Debug, Clone)]
struct ObservedDays(Vec<(usize, u64, f64)>);

impl ObservedDays {
    fn new(series: &CountSeries) -> Self {
        Self(
            series
                .values
                .iter()
                .enumerate()
                .filter_map(|(t, k)| k.map(|k| (t, k, ln_factorial(k))))
                .collect(),
        )
    }

    fn log_likelihood(&self, mean: &[f64], phi: f64) -> f64 {
        self.0
            .iter()
            .map(|&(t, k, lnf)| negbin_logpmf_with_lnfact(k, lnf, mean[t].max(0.0), phi))
            .sum()
    }
}

/// Posterior over [`ModelParams`] for one data bundle.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    pub data: FitData,
    pub priors: Priors,
    layout: ParamLayout,
    deaths_obs: ObservedDays,
    feed_obs: Vec<ObservedDays>,
}

impl PosteriorModel {
    pub fn new(data: FitData, priors: Priors) -> Result<Self> {
        data.validate()?;
        let layout = data.layout();
        let deaths_obs = ObservedDays::new(&data.deaths);
        let feed_obs = data.feeds.iter().map(|f| ObservedDays::new(&f.counts)).collect();
        Ok(Self {
            data,
            priors,
            layout,
            deaths_obs,
            feed_obs,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// Log prior density of constrained parameters (no Jacobian).
    pub fn log_prior(&self, p: &ModelParams) -> f64 {
        let pr = &self.priors;
        let t = &p.transmission;
        if t.initial_seed >= t.population {
            return f64::NEG_INFINITY;
        }
        let mut lp = pr.initial_seed.ln_pdf(t.initial_seed);
        lp += pr.beta_initial.ln_pdf(t.beta_knots[0]);
        if let Some(sd) = pr.beta_walk_sd {
            for w in t.beta_knots.windows(2) {
                lp += Prior::LogNormal {
                    log_mean: w[0].ln(),
                    log_sd: sd,
                }
                .ln_pdf(w[1]);
            }
        }
        lp += pr.latent_period.ln_pdf(t.latent_period);
        lp += pr.infectious_period.ln_pdf(t.infectious_period);
        lp += pr.ifr.ln_pdf(p.deaths.ifr);
        lp += pr.death_phi.ln_pdf(p.deaths.phi);
        for f in &p.feeds {
            lp += pr.kappa.ln_pdf(f.kappa);
            if let Some(c) = pr.lag_concentration {
                lp += dirichlet_ln_pdf(&f.lag_weights, c);
            }
            lp += pr.feed_phi.ln_pdf(f.phi);
        }
        lp
    }

    /// Log-likelihood of the data under constrained parameters.
    pub fn log_likelihood(&self, p: &ModelParams) -> Result<f64> {
        let n_days = self.data.n_days();
        let traj = simulate(&p.transmission, self.data.epoch, n_days)?;
        let i_new = &traj.i_new.values;
        let mut mean = vec![0.0; i_new.len()];
        convolve_into(i_new, p.deaths.delay.probs(), p.deaths.ifr, &mut mean);
        let mut ll = self.deaths_obs.log_likelihood(&mean, p.deaths.phi);
        for (obs, link) in self.feed_obs.iter().zip(&p.feeds) {
            convolve_into(i_new, &link.lag_weights, link.kappa, &mut mean);
            ll += obs.log_likelihood(&mean, link.phi);
        }
        Ok(ll)
    }

    /// Log posterior at an unconstrained point: priors, Jacobians and the
    /// likelihood of a fresh simulation.
    pub fn log_posterior(&self, u: &[f64]) -> Result<f64> {
        let (p, log_jac) = self.layout.constrain(u)?;
        let lp = self.log_prior(&p);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        let ll = self.log_likelihood(&p)?;
        Ok(lp + log_jac + ll)
    }

    /// Unconstrained point at the prior centres.
    pub fn prior_center(&self) -> Vec<f64> {
        let pr = &self.priors;
        let center = |p: &Prior, fallback: f64| p.center().unwrap_or(fallback);
        let beta0 = center(&pr.beta_initial, 0.25);
        let params = ModelParams {
            transmission: crate::transmission::TransmissionParams {
                population: self.data.population,
                initial_seed: center(&pr.initial_seed, 10.0).min(0.5 * self.data.population),
                beta_knots: vec![beta0; self.layout.n_knots],
                latent_period: center(&pr.latent_period, 4.0),
                infectious_period: center(&pr.infectious_period, 5.0),
            },
            deaths: crate::observation::DeathLink {
                ifr: center(&pr.ifr, 0.01),
                delay: self.data.delay.clone(),
                phi: center(&pr.death_phi, 10.0),
            },
            feeds: self
                .data
                .feeds
                .iter()
                .map(|_| crate::observation::FeedLink {
                    kappa: center(&pr.kappa, 1.0),
                    lag_weights: vec![1.0 / self.layout.feed_lags as f64; self.layout.feed_lags],
                    phi: center(&pr.feed_phi, 10.0),
                })
                .collect(),
        };
        self.layout
            .unconstrain(&params)
            .expect("prior centre matches the layout")
    }
}

impl LogDensity for PosteriorModel {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        match self.log_posterior(u) {
            Ok(v) if !v.is_nan() => v,
            _ => f64::NEG_INFINITY,
        }
    }

    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.prior_center()
            .into_iter()
            .map(|c| c + rng.random_range(-0.5..0.5))
            .collect()
    }

    fn param_names(&self) -> Vec<String> {
        self.layout.names()
    }

    fn constrain_draw(&self, u: &[f64]) -> Result<Vec<f64>> {
        let (p, _) = self.layout.constrain(u)?;
        p.validate()
            .map_err(|e| Error::Numerical(format!("draw violates constraints: {e}")))?;
        Ok(self.layout.flatten(&p))
    }
}
