//! Prior densities over constrained parameter values.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Prior {
    /// Improper, contributes nothing.
    Flat,
    Normal { mean: f64, sd: f64 },
    LogNormal { log_mean: f64, log_sd: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { alpha: f64, beta: f64 },
    Exponential { rate: f64 },
}

impl Prior {
    pub fn gamma_mean_sd(mean: f64, sd: f64) -> Self {
        Prior::Gamma {
            shape: (mean / sd).powi(2),
            rate: mean / (sd * sd),
        }
    }

    pub fn beta_mean_concentration(mean: f64, concentration: f64) -> Self {
        Prior::Beta {
            alpha: mean * concentration,
            beta: (1.0 - mean) * concentration,
        }
    }

    pub fn exponential_mean(mean: f64) -> Self {
        Prior::Exponential { rate: 1.0 / mean }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Prior::Flat => 0.0,
            Prior::Normal { mean, sd } => normal_ln_pdf(x, mean, sd),
            Prior::LogNormal { log_mean, log_sd } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                normal_ln_pdf(x.ln(), log_mean, log_sd) - x.ln()
            }
            Prior::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Prior::Beta { alpha, beta } => {
                if x <= 0.0 || x >= 1.0 {
                    return f64::NEG_INFINITY;
                }
                (alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - ln_beta(alpha, beta)
            }
            Prior::Exponential { rate } => {
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                rate.ln() - rate * x
            }
        }
    }

    /// A central value used to place initial points.
    pub fn center(&self) -> Option<f64> {
        match *self {
            Prior::Flat => None,
            Prior::Normal { mean, .. } => Some(mean),
            Prior::LogNormal { log_mean, .. } => Some(log_mean.exp()),
            Prior::Gamma { shape, rate } => Some(shape / rate),
            Prior::Beta { alpha, beta } => Some(alpha / (alpha + beta)),
            Prior::Exponential { rate } => Some(1.0 / rate),
        }
    }
}

pub(crate) fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Log-density of a symmetric Dirichlet(`concentration`) at `w`.
pub(crate) fn dirichlet_ln_pdf(w: &[f64], concentration: f64) -> f64 {
    let k = w.len() as f64;
    let norm = ln_gamma(k * concentration) - k * ln_gamma(concentration);
    if concentration == 1.0 {
        return norm;
    }
    norm + w
        .iter()
        .map(|x| (concentration - 1.0) * x.ln())
        .sum::<f64>()
}

/// Prior set for every sampled quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    pub initial_seed: Prior,
    /// Prior on the first weekly contact rate.
    pub beta_initial: Prior,
    /// Step sd of the Gaussian random walk on log contact rates; `None`
    /// leaves later knots unpenalised.
    pub beta_walk_sd: Option<f64>,
    pub latent_period: Prior,
    pub infectious_period: Prior,
    pub ifr: Prior,
    pub death_phi: Prior,
    pub kappa: Prior,
    /// Symmetric Dirichlet concentration on lag weights; `None` is flat.
    pub lag_concentration: Option<f64>,
    pub feed_phi: Prior,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            initial_seed: Prior::LogNormal {
                log_mean: 10f64.ln(),
                log_sd: 1.0,
            },
            beta_initial: Prior::LogNormal {
                log_mean: 0.25f64.ln(),
                log_sd: 0.5,
            },
            beta_walk_sd: Some(0.2),
            latent_period: Prior::gamma_mean_sd(4.0, 1.0),
            infectious_period: Prior::gamma_mean_sd(5.0, 1.0),
            ifr: Prior::beta_mean_concentration(0.01, 100.0),
            death_phi: Prior::exponential_mean(10.0),
            kappa: Prior::LogNormal {
                log_mean: 0.0,
                log_sd: 1.0,
            },
            lag_concentration: Some(1.0),
            feed_phi: Prior::exponential_mean(10.0),
        }
    }
}

impl Priors {
    /// Every prior flat; the posterior is the likelihood plus Jacobians.
    pub fn flat() -> Self {
        Self {
            initial_seed: Prior::Flat,
            beta_initial: Prior::Flat,
            beta_walk_sd: None,
            latent_period: Prior::Flat,
            infectious_period: Prior::Flat,
            ifr: Prior::Flat,
            death_phi: Prior::Flat,
            kappa: Prior::Flat,
            lag_concentration: None,
            feed_phi: Prior::Flat,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(prior: Prior, lo: f64, hi: f64) -> f64 {
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|i| prior.ln_pdf(lo + (i as f64 + 0.5) * h).exp() * h)
            .sum()
    }

    #[test]
    fn densities_normalise() {
        assert!((integrate(Prior::Normal { mean: 1.0, sd: 2.0 }, -20.0, 22.0) - 1.0).abs() < 1e-6);
        assert!((integrate(Prior::gamma_mean_sd(4.0, 1.0), 0.0, 20.0) - 1.0).abs() < 1e-6);
        assert!((integrate(Prior::beta_mean_concentration(0.3, 10.0), 0.0, 1.0) - 1.0).abs() < 1e-5);
        assert!((integrate(Prior::exponential_mean(10.0), 0.0, 400.0) - 1.0).abs() < 1e-6);
        let ln = Prior::LogNormal {
            log_mean: 0.0,
            log_sd: 0.5,
        };
        assert!((integrate(ln, 0.0, 30.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn moment_constructors() {
        match Prior::gamma_mean_sd(5.0, 1.0) {
            Prior::Gamma { shape, rate } => {
                assert!((shape - 25.0).abs() < 1e-12 && (rate - 5.0).abs() < 1e-12)
            }
            _ => unreachable!(),
        }
        assert_eq!(Prior::beta_mean_concentration(0.01, 100.0).center(), Some(0.01));
    }

    #[test]
    fn dirichlet_one_is_uniform() {
        let a = dirichlet_ln_pdf(&[0.2, 0.3, 0.5], 1.0);
        let b = dirichlet_ln_pdf(&[0.9, 0.05, 0.05], 1.0);
        assert_eq!(a, b);
        assert!((a - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn out_of_support_is_neg_infinity() {
        assert_eq!(Prior::beta_mean_concentration(0.5, 2.0).ln_pdf(1.0), f64::NEG_INFINITY);
        assert_eq!(Prior::gamma_mean_sd(1.0, 1.0).ln_pdf(-1.0), f64::NEG_INFINITY);
    }
}
