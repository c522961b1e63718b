//! Mapping between the sampler's unconstrained vector and model parameters.
//!
//! Positive quantities use a log transform, the IFR a logit, and feed lag
//! weights Stan-style stick breaking. Each transform contributes its
//! log-Jacobian so densities can be evaluated in unconstrained space.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::observation::{DeathLink, DelayPmf, FeedLink};
use crate::transmission::TransmissionParams;

/// Every sampled quantity, in constrained form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub transmission: TransmissionParams,
    pub deaths: DeathLink,
    pub feeds: Vec<FeedLink>,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.transmission.validate()?;
        self.deaths.validate()?;
        for f in &self.feeds {
            f.validate()?;
        }
        Ok(())
    }
}

/// Shape of the parameter vector for one model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub n_knots: usize,
    /// Feed names, in the order their links appear in [`ModelParams::feeds`].
    pub feed_names: Vec<String>,
    /// Number of lag weights per feed.
    pub feed_lags: usize,
    pub population: f64,
    pub delay: DelayPmf,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Stick-breaking map from `K - 1` reals onto the `K`-simplex. Returns the
/// log-Jacobian.
pub fn stick_breaking(y: &[f64], out: &mut Vec<f64>) -> f64 {
    let k = y.len() + 1;
    out.clear();
    let mut remaining = 1.0;
    let mut log_jac = 0.0;
    for (j, yj) in y.iter().enumerate() {
        let shifted = yj - ((k - 1 - j) as f64).ln();
        let z = logistic(shifted);
        let x = remaining * z;
        log_jac += -softplus(-shifted) - softplus(shifted) + remaining.ln();
        out.push(x);
        remaining -= x;
    }
    out.push(remaining.max(0.0));
    log_jac
}

/// Inverse of [`stick_breaking`].
pub fn stick_breaking_inverse(x: &[f64]) -> Vec<f64> {
    let k = x.len();
    let mut remaining = 1.0;
    let mut y = Vec::with_capacity(k.saturating_sub(1));
    for (j, xj) in x[..k - 1].iter().enumerate() {
        let z = (xj / remaining).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        y.push(logit(z) + ((k - 1 - j) as f64).ln());
        remaining -= xj;
    }
    y
}

impl ParamLayout {
    pub fn n_feeds(&self) -> usize {
        self.feed_names.len()
    }

    /// Length of the unconstrained vector.
    pub fn dim(&self) -> usize {
        1 + self.n_knots + 4 + self.n_feeds() * (self.feed_lags + 1)
    }

    /// Names of the constrained (flattened) parameters.
    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["initial_seed".to_string()];
        names.extend((0..self.n_knots).map(|k| format!("beta_{k}")));
        names.extend(
            ["latent_period", "infectious_period", "ifr", "death_phi"]
                .iter()
                .map(|s| s.to_string()),
        );
        for feed in &self.feed_names {
            names.push(format!("{feed}_kappa"));
            names.extend((0..self.feed_lags).map(|l| format!("{feed}_lag_{l}")));
            names.push(format!("{feed}_phi"));
        }
        names
    }

    /// Maps an unconstrained vector to parameters plus the log-Jacobian.
    pub fn constrain(&self, u: &[f64]) -> Result<(ModelParams, f64)> {
        ensure!(
            u.len() == self.dim(),
            InvalidArgument,
            "expected {} unconstrained values, got {}",
            self.dim(),
            u.len()
        );
        ensure!(
            u.iter().all(|v| v.is_finite()),
            Numerical,
            "non-finite unconstrained parameter"
        );
        let mut it = u.iter().copied();
        let mut next = || it.next().expect("length checked");
        let mut log_jac = 0.0;
        let positive = |v: f64, jac: &mut f64| {
            *jac += v;
            v.exp()
        };

        let initial_seed = positive(next(), &mut log_jac);
        let beta_knots: Vec<f64> = (0..self.n_knots).map(|_| positive(next(), &mut log_jac)).collect();
        let latent_period = positive(next(), &mut log_jac);
        let infectious_period = positive(next(), &mut log_jac);
        let ifr_raw = next();
        let ifr = logistic(ifr_raw);
        log_jac += -softplus(-ifr_raw) - softplus(ifr_raw);
        let death_phi = positive(next(), &mut log_jac);

        let mut feeds = Vec::with_capacity(self.n_feeds());
        let mut stick = Vec::with_capacity(self.feed_lags - 1);
        for _ in 0..self.n_feeds() {
            let kappa = positive(next(), &mut log_jac);
            stick.clear();
            stick.extend((0..self.feed_lags - 1).map(|_| next()));
            let mut lag_weights = Vec::with_capacity(self.feed_lags);
            log_jac += stick_breaking(&stick, &mut lag_weights);
            let phi = positive(next(), &mut log_jac);
            feeds.push(FeedLink {
                kappa,
                lag_weights,
                phi,
            });
        }

        let params = ModelParams {
            transmission: TransmissionParams {
                population: self.population,
                initial_seed,
                beta_knots,
                latent_period,
                infectious_period,
            },
            deaths: DeathLink {
                ifr,
                delay: self.delay.clone(),
                phi: death_phi,
            },
            feeds,
        };
        Ok((params, log_jac))
    }

    pub fn unconstrain(&self, p: &ModelParams) -> Result<Vec<f64>> {
        self.check_shape(p)?;
        let t = &p.transmission;
        let mut u = Vec::with_capacity(self.dim());
        u.push(t.initial_seed.ln());
        u.extend(t.beta_knots.iter().map(|b| b.ln()));
        u.push(t.latent_period.ln());
        u.push(t.infectious_period.ln());
        u.push(logit(p.deaths.ifr));
        u.push(p.deaths.phi.ln());
        for f in &p.feeds {
            u.push(f.kappa.ln());
            u.extend(stick_breaking_inverse(&f.lag_weights));
            u.push(f.phi.ln());
        }
        Ok(u)
    }

    /// Constrained values in [`Self::names`] order.
    pub fn flatten(&self, p: &ModelParams) -> Vec<f64> {
        let t = &p.transmission;
        let mut v = vec![t.initial_seed];
        v.extend(&t.beta_knots);
        v.extend([t.latent_period, t.infectious_period, p.deaths.ifr, p.deaths.phi]);
        for f in &p.feeds {
            v.push(f.kappa);
            v.extend(&f.lag_weights);
            v.push(f.phi);
        }
        v
    }

    /// Inverse of [`Self::flatten`].
    pub fn unflatten(&self, v: &[f64]) -> Result<ModelParams> {
        let expected = self.names().len();
        ensure!(
            v.len() == expected,
            InvalidArgument,
            "expected {expected} constrained values, got {}",
            v.len()
        );
        let k = self.n_knots;
        let mut feeds = Vec::with_capacity(self.n_feeds());
        let mut offset = 5 + k;
        for _ in 0..self.n_feeds() {
            let kappa = v[offset];
            let lag_weights = v[offset + 1..offset + 1 + self.feed_lags].to_vec();
            let phi = v[offset + 1 + self.feed_lags];
            feeds.push(FeedLink {
                kappa,
                lag_weights,
                phi,
            });
            offset += self.feed_lags + 2;
        }
        Ok(ModelParams {
            transmission: TransmissionParams {
                population: self.population,
                initial_seed: v[0],
                beta_knots: v[1..1 + k].to_vec(),
                latent_period: v[1 + k],
                infectious_period: v[2 + k],
            },
            deaths: DeathLink {
                ifr: v[3 + k],
                delay: self.delay.clone(),
                phi: v[4 + k],
            },
            feeds,
        })
    }

    fn check_shape(&self, p: &ModelParams) -> Result<()> {
        if p.transmission.beta_knots.len() != self.n_knots
            || p.feeds.len() != self.n_feeds()
            || p.feeds.iter().any(|f| f.lag_weights.len() != self.feed_lags)
        {
            return Err(Error::InvalidArgument(
                "parameters do not match the layout".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout(feeds: usize) -> ParamLayout {
        ParamLayout {
            n_knots: 3,
            feed_names: (0..feeds).map(|i| format!("f{i}")).collect(),
            feed_lags: 4,
            population: 1e6,
            delay: DelayPmf::default(),
        }
    }

    #[test]
    fn dimensions_and_names() {
        let l = layout(2);
        assert_eq!(l.dim(), 1 + 3 + 4 + 2 * 5);
        assert_eq!(l.names().len(), 1 + 3 + 4 + 2 * 6);
        assert_eq!(l.names()[4], "latent_period");
    }

    #[test]
    fn zero_stick_gives_uniform_weights() {
        let mut w = Vec::new();
        stick_breaking(&[0.0; 4], &mut w);
        for x in &w {
            assert!((x - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn stick_breaking_jacobian_matches_finite_differences() {
        // Jacobian of (y) -> first K-1 simplex coordinates.
        let y = [0.3, -1.2, 0.7];
        let mut base = Vec::new();
        let log_jac = stick_breaking(&y, &mut base);
        let h = 1e-6;
        let n = y.len();
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let (mut up, mut dn) = (y, y);
            up[j] += h;
            dn[j] -= h;
            let (mut a, mut b) = (Vec::new(), Vec::new());
            stick_breaking(&up, &mut a);
            stick_breaking(&dn, &mut b);
            for i in 0..n {
                jac[i][j] = (a[i] - b[i]) / (2.0 * h);
            }
        }
        // lower triangular: determinant is the product of the diagonal
        let det: f64 = (0..n).map(|i| jac[i][i]).product();
        assert!((det.ln() - log_jac).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(u in prop::collection::vec(-3.0f64..3.0, 18)) {
            let l = layout(2);
            let (p, _) = l.constrain(&u).unwrap();
            let back = l.unconstrain(&p).unwrap();
            for (a, b) in u.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            let flat = l.flatten(&p);
            prop_assert_eq!(l.unflatten(&flat).unwrap(), p.clone());
            for f in &p.feeds {
                prop_assert!((f.lag_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(f.lag_weights.iter().all(|w| *w >= 0.0));
            }
            prop_assert!(p.deaths.ifr > 0.0 && p.deaths.ifr < 1.0);
        }
    }
}
