//! Synthetic surveillance data: simulate the transmission model, map to
//! expected counts, and draw negative-binomial observations.

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::inference::{FitData, ModelParams};
use crate::observation::{
    death_mean, feed_mean, negbin_sample, DeathLink, DelayPmf, FeedLink, FEED_LAGS,
};
use crate::series::{CountSeries, DateSeries};
use crate::transmission::{simulate, TransmissionParams};

/// Ground truth for a synthetic region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub epoch: NaiveDate,
    /// Days of observed data.
    pub n_days: usize,
    /// Days held out after the data for forecast evaluation.
    pub horizon: usize,
    pub truth: ModelParams,
    /// Names of the feeds in `truth.feeds`.
    pub feed_names: Vec<String>,
}

impl Scenario {
    /// A one-million-person region with an early surge, a lockdown-like
    /// trough and a second rise, observed for `n_days`.
    ///
    /// Each `(name, kappa)` feed reports a fraction `kappa` of new infections
    /// with geometrically decaying lags (mean about 1.5 days) and low noise.
    pub fn demo(n_days: usize, horizon: usize, feeds: &[(&str, f64)]) -> Self {
        let n_knots = n_days.div_ceil(7);
        let beta_knots = (0..n_knots)
            .map(|k| match k {
                0..=7 => 0.45,
                8..=13 => 0.17,
                _ => 0.32,
            })
            .collect();
        let lags: Vec<f64> = (0..=FEED_LAGS).map(|l| 0.6f64.powi(l as i32)).collect();
        let total: f64 = lags.iter().sum();
        let lag_weights: Vec<f64> = lags.iter().map(|w| w / total).collect();
        Self {
            epoch: crate::ingest::default_epoch(),
            n_days,
            horizon,
            truth: ModelParams {
                transmission: TransmissionParams {
                    population: 1e6,
                    initial_seed: 10.0,
                    beta_knots,
                    latent_period: 4.0,
                    infectious_period: 5.0,
                },
                deaths: DeathLink {
                    ifr: 0.01,
                    delay: DelayPmf::default(),
                    phi: 10.0,
                },
                feeds: feeds
                    .iter()
                    .map(|&(_, kappa)| FeedLink {
                        kappa,
                        lag_weights: lag_weights.clone(),
                        phi: 50.0,
                    })
                    .collect(),
            },
            feed_names: feeds.iter().map(|(n, _)| n.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub data: FitData,
    /// Observed deaths over the held-out window.
    pub future_deaths: Vec<u64>,
    /// True expected deaths over data and held-out days.
    pub expected_deaths: DateSeries,
    pub i_new: DateSeries,
}

pub fn generate<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<SyntheticBundle> {
    ensure!(scenario.n_days >= 1, InvalidArgument, "need at least one observed day");
    ensure!(
        scenario.feed_names.len() == scenario.truth.feeds.len(),
        InvalidArgument,
        "{} feed names for {} feed links",
        scenario.feed_names.len(),
        scenario.truth.feeds.len()
    );
    scenario.truth.validate()?;
    let total = scenario.n_days + scenario.horizon;
    let traj = simulate(&scenario.truth.transmission, scenario.epoch, total)?;
    let i_new = DateSeries::new(scenario.epoch, traj.i_new.values[..total].to_vec());

    let expected_deaths = death_mean(&i_new, &scenario.truth.deaths);
    let mut deaths = Vec::with_capacity(total);
    for mu in &expected_deaths.values {
        deaths.push(negbin_sample(rng, *mu, scenario.truth.deaths.phi)?);
    }
    let observed: CountSeries = DateSeries::new(
        scenario.epoch,
        deaths[..scenario.n_days].iter().map(|k| Some(*k)).collect(),
    );
    let mut data = FitData::new(scenario.epoch, scenario.truth.transmission.population, observed);
    data.delay = scenario.truth.deaths.delay.clone();
    if let Some(first) = scenario.truth.feeds.first() {
        data.feed_lags = first.lag_weights.len();
    }

    for (name, link) in scenario.feed_names.iter().zip(&scenario.truth.feeds) {
        ensure!(
            link.lag_weights.len() == data.feed_lags,
            InvalidArgument,
            "all feeds must share one lag support"
        );
        let mean = feed_mean(&i_new, link);
        let counts = mean.values[..scenario.n_days]
            .iter()
            .map(|mu| negbin_sample(rng, *mu, link.phi).map(Some))
            .collect::<Result<Vec<_>>>()?;
        data = data.with_feed(name.clone(), DateSeries::new(scenario.epoch, counts));
    }

    Ok(SyntheticBundle {
        data,
        future_deaths: deaths[scenario.n_days..].to_vec(),
        expected_deaths,
        i_new,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::sampler::stream_rng;

    #[test]
    fn demo_bundle_shapes() {
        let sc = Scenario::demo(120, 7, &[("twitter", 0.05)]);
        assert_eq!(sc.truth.transmission.beta_knots.len(), 18);
        let b = generate(&sc, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(b.data.deaths.len(), 120);
        assert_eq!(b.data.feeds[0].counts.len(), 120);
        assert_eq!(b.future_deaths.len(), 7);
        assert_eq!(b.expected_deaths.len(), 127);
        assert_eq!(b.data.n_knots(), 18);
        assert!(b.data.deaths.observed_total() > 100);
        b.data.validate().unwrap();
    }

    #[test]
    fn same_seed_same_data() {
        let sc = Scenario::demo(30, 3, &[]);
        let a = generate(&sc, &mut stream_rng(4, 0)).unwrap();
        let b = generate(&sc, &mut stream_rng(4, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_kappa_feed_is_silent() {
        let sc = Scenario::demo(50, 7, &[("tests", 0.0)]);
        let b = generate(&sc, &mut stream_rng(2, 0)).unwrap();
        assert_eq!(b.data.feeds[0].counts.observed_total(), 0);
    }

    #[test]
    fn mismatched_feed_names_rejected() {
        let mut sc = Scenario::demo(30, 3, &[("a", 0.1)]);
        sc.feed_names.clear();
        assert!(generate(&sc, &mut stream_rng(1, 0)).is_err());
    }
}
