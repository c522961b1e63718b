//! Posterior-predictive death forecasts.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::model::PosteriorModel;
use super::sampler::{quantile, stream_rng, PosteriorSamples};
use crate::error::{ensure, Error, Result};
use crate::observation::{death_mean, negbin_sample};
use crate::transmission::simulate;

/// Fraction of posterior draws allowed to fail simulation.
pub const MAX_DROPPED_FRACTION: f64 = 0.01;

/// Default forecast length in days.
pub const DEFAULT_HORIZON: usize = 7;

/// Stream id reserved for forecast sampling (chains use their own ids).
const FORECAST_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub start: NaiveDate,
    pub horizon: usize,
    /// `samples[day][draw]`: one predictive count per retained draw.
    pub samples: Vec<Vec<f64>>,
    /// Sample mean of the predictive counts.
    pub mean: Vec<f64>,
    /// Sample variance of the predictive counts.
    pub variance: Vec<f64>,
    /// Average of per-draw expected deaths.
    pub expected_mean: Vec<f64>,
    /// Law-of-total-variance predictive variance: mean negative-binomial
    /// variance plus the variance of per-draw expected deaths.
    pub expected_variance: Vec<f64>,
    /// Variance of per-draw expected deaths alone.
    pub mean_variance: Vec<f64>,
    pub dropped: usize,
}

impl ForecastResult {
    pub fn date_at(&self, day: usize) -> NaiveDate {
        self.start + chrono::Duration::days(day as i64)
    }

    pub fn quantile(&self, day: usize, q: f64) -> f64 {
        quantile(&mut self.samples[day].clone(), q)
    }

    /// Central interval holding `level` of the predictive mass.
    pub fn central_interval(&self, day: usize, level: f64) -> (f64, f64) {
        let mut s = self.samples[day].clone();
        let tail = (1.0 - level) / 2.0;
        let lo = quantile(&mut s, tail);
        let hi = quantile(&mut s, 1.0 - tail);
        (lo, hi)
    }
}

/// Simulates each retained draw through the forecast window (the last
/// contact-rate knot is held constant past the data), computes expected
/// deaths and draws one negative-binomial count per forecast day.
pub fn posterior_predictive(
    samples: &PosteriorSamples,
    model: &PosteriorModel,
    horizon: usize,
    seed: u64,
) -> Result<ForecastResult> {
    ensure!(horizon >= 1, InvalidArgument, "forecast horizon must be at least one day");
    ensure!(samples.total_draws() > 0, InvalidArgument, "no posterior draws");
    let layout = model.layout();
    ensure!(
        samples.names == layout.names(),
        InvalidArgument,
        "posterior parameters do not match the model layout"
    );

    let n_days = model.data.n_days();
    let total_days = n_days + horizon;
    let mut rng = stream_rng(seed, FORECAST_STREAM);

    let mut counts = vec![Vec::with_capacity(samples.total_draws()); horizon];
    let mut means = vec![Vec::with_capacity(samples.total_draws()); horizon];
    let mut nb_var = vec![0.0; horizon];
    let mut dropped = 0usize;

    for draw in samples.draws() {
        let outcome = layout.unflatten(draw).and_then(|p| {
            let traj = simulate(&p.transmission, model.data.epoch, total_days)?;
            Ok((death_mean(&traj.i_new, &p.deaths), p.deaths.phi))
        });
        let (expected, phi) = match outcome {
            Ok(v) => v,
            Err(e) => {
                log::debug!("dropping posterior draw: {e}");
                dropped += 1;
                continue;
            }
        };
        for day in 0..horizon {
            let mu = expected.values[n_days + day].max(0.0);
            let k = negbin_sample(&mut rng, mu, phi)?;
            counts[day].push(k as f64);
            means[day].push(mu);
            nb_var[day] += mu + mu * mu / phi;
        }
    }

    let total = samples.total_draws();
    if dropped as f64 > MAX_DROPPED_FRACTION * total as f64 {
        return Err(Error::Numerical(format!(
            "{dropped} of {total} posterior draws failed to simulate"
        )));
    }
    let kept = (total - dropped) as f64;

    let moments = |v: &[f64]| -> (f64, f64) {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        } else {
            0.0
        };
        (m, var)
    };

    let mut mean = Vec::with_capacity(horizon);
    let mut variance = Vec::with_capacity(horizon);
    let mut expected_mean = Vec::with_capacity(horizon);
    let mut expected_variance = Vec::with_capacity(horizon);
    let mut mean_variance = Vec::with_capacity(horizon);
    for day in 0..horizon {
        let (m, v) = moments(&counts[day]);
        mean.push(m);
        variance.push(v);
        let mu_mean = means[day].iter().sum::<f64>() / kept;
        let mu_var = means[day].iter().map(|x| (x - mu_mean).powi(2)).sum::<f64>() / kept;
        expected_mean.push(mu_mean);
        mean_variance.push(mu_var);
        expected_variance.push(nb_var[day] / kept + mu_var);
    }

    Ok(ForecastResult {
        start: model.data.forecast_start(),
        horizon,
        samples: counts,
        mean,
        variance,
        expected_mean,
        expected_variance,
        mean_variance,
        dropped,
    })
}
