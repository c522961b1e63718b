//! Adaptive random-walk Metropolis.
//!
//! Proposals are Gaussian with covariance `lambda^2 C`. During burn-in `C`
//! tracks the chain's running covariance (full or diagonal) and `lambda`
//! follows a Robbins-Monro recursion towards the target acceptance rate.
//! After burn-in the kernel is frozen.
//!
//! With `warm_start`, a Laplace approximation at the posterior mode supplies
//! over-dispersed starting points and the initial `C`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{ess, rhat};
use super::warmstart::{laplace, Laplace};
use super::model::LogDensity;
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationConfig {
    pub target_acceptance: f64,
    /// Initial proposal sd of every unconstrained coordinate.
    pub initial_scale: f64,
    /// Metropolis steps per stored iteration.
    pub steps_per_draw: usize,
    /// Robbins-Monro step `gamma_n = (n + 1)^-decay`.
    pub decay: f64,
    /// Chains whose post-adaptation acceptance falls below this abort.
    pub min_acceptance: f64,
    /// Attempts at finding a finite initial point.
    pub init_attempts: usize,
    pub covariance: CovarianceKind,
    /// Start chains around the posterior mode instead of `initial_point`.
    pub warm_start: bool,
    /// Starting points are drawn from the Laplace approximation with its sds
    /// multiplied by this.
    pub init_dispersion: f64,
    /// Pseudo-count of the initial covariance in the running estimate.
    pub prior_weight: f64,
    /// Optimiser iterations for the mode search.
    pub mode_iters: u64,
}

/// Shape of the adapted proposal covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Diagonal,
    Dense,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            target_acceptance: 0.234,
            initial_scale: 0.1,
            steps_per_draw: 1,
            decay: 0.6,
            min_acceptance: 0.01,
            init_attempts: 100,
            covariance: CovarianceKind::Dense,
            warm_start: true,
            init_dispersion: 2.0,
            prior_weight: 20.0,
            mode_iters: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_chains: usize,
    /// Iterations per chain, burn-in included.
    pub n_draws: usize,
    pub n_burn_in: usize,
    pub seed: u64,
    pub adaptation: AdaptationConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 6,
            n_draws: 2000,
            n_burn_in: 1000,
            seed: 20200217,
            adaptation: AdaptationConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_chains >= 1, Config, "need at least one chain");
        ensure!(
            self.n_burn_in < self.n_draws,
            Config,
            "burn-in ({}) must be shorter than the draw count ({})",
            self.n_burn_in,
            self.n_draws
        );
        let a = &self.adaptation;
        ensure!(
            a.target_acceptance > 0.0 && a.target_acceptance < 1.0,
            Config,
            "target acceptance must lie in (0, 1)"
        );
        ensure!(a.initial_scale > 0.0, Config, "initial proposal scale must be positive");
        ensure!(a.steps_per_draw >= 1, Config, "steps per draw must be at least 1");
        ensure!(a.init_dispersion > 0.0, Config, "initial dispersion must be positive");
        ensure!(a.prior_weight >= 1.0, Config, "covariance prior weight must be at least 1");
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        self.n_draws - self.n_burn_in
    }
}

/// Generator for `(seed, stream)`; streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Running moments of the chain and the proposal factor derived from them.
struct ProposalScale {
    kind: CovarianceKind,
    mean: Vec<f64>,
    /// Row-major `dim x dim`; only the diagonal is used for `Diagonal`.
    cov: Vec<f64>,
    /// Lower Cholesky factor of `cov` (dense) or marginal sds (diagonal).
    factor: Vec<f64>,
    updates_since_factor: usize,
}

impl ProposalScale {
    const REFACTOR_EVERY: usize = 10;

    fn new(x: &[f64], initial_scale: f64, kind: CovarianceKind) -> Self {
        let dim = x.len();
        let mut cov = vec![0.0; dim * dim];
        for j in 0..dim {
            cov[j * dim + j] = initial_scale * initial_scale;
        }
        Self::with_covariance(x, cov, kind)
    }

    fn with_covariance(x: &[f64], mut cov: Vec<f64>, kind: CovarianceKind) -> Self {
        let dim = x.len();
        if kind == CovarianceKind::Diagonal {
            for i in 0..dim {
                for j in 0..dim {
                    if i != j {
                        cov[i * dim + j] = 0.0;
                    }
                }
            }
        }
        let mut s = Self {
            kind,
            mean: x.to_vec(),
            cov,
            factor: Vec::new(),
            updates_since_factor: 0,
        };
        s.refactor();
        s
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn propose(&self, x: &[f64], z: &[f64], lambda: f64, out: &mut [f64]) {
        let dim = self.dim();
        match self.kind {
            CovarianceKind::Diagonal => {
                for j in 0..dim {
                    out[j] = x[j] + lambda * self.factor[j] * z[j];
                }
            }
            CovarianceKind::Dense => {
                for i in 0..dim {
                    let row = &self.factor[i * dim..i * dim + i + 1];
                    let dot: f64 = row.iter().zip(z).map(|(l, zj)| l * zj).sum();
                    out[i] = x[i] + lambda * dot;
                }
            }
        }
    }

    fn update(&mut self, x: &[f64], w: f64) {
        let dim = self.dim();
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for j in 0..dim {
            self.mean[j] += w * delta[j];
        }
        match self.kind {
            CovarianceKind::Diagonal => {
                for j in 0..dim {
                    let c = &mut self.cov[j * dim + j];
                    *c = (1.0 - w) * *c + w * (1.0 - w) * delta[j] * delta[j];
                }
            }
            CovarianceKind::Dense => {
                for i in 0..dim {
                    for j in 0..=i {
                        let c = (1.0 - w) * self.cov[i * dim + j] + w * (1.0 - w) * delta[i] * delta[j];
                        self.cov[i * dim + j] = c;
                        self.cov[j * dim + i] = c;
                    }
                }
            }
        }
        self.updates_since_factor += 1;
        if self.updates_since_factor >= Self::REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn refactor(&mut self) {
        let dim = self.dim();
        self.updates_since_factor = 0;
        match self.kind {
            CovarianceKind::Diagonal => {
                self.factor = (0..dim).map(|j| self.cov[j * dim + j].max(1e-12).sqrt()).collect();
            }
            CovarianceKind::Dense => {
                let mut jitter = 1e-10;
                loop {
                    if let Some(l) = cholesky(&self.cov, dim, jitter) {
                        self.factor = l;
                        return;
                    }
                    jitter *= 10.0;
                }
            }
        }
    }

    fn marginal_sd(&self, lambda: f64) -> Vec<f64> {
        let dim = self.dim();
        (0..dim).map(|j| lambda * self.cov[j * dim + j].sqrt()).collect()
    }
}

/// Lower Cholesky factor of `a + jitter * I`, or `None` if not positive
/// definite.
pub(crate) fn cholesky(a: &[f64], dim: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = a[i * dim + j];
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * dim + i] = sum.sqrt();
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }
    Some(l)
}

/// Post-burn-in output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub chain_id: usize,
    /// Constrained draws, one row per retained iteration.
    pub draws: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    /// Acceptance rate of the frozen kernel.
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    /// Final proposal sds in unconstrained space.
    pub proposal_sd: Vec<f64>,
}

pub fn run_chain<T: LogDensity + ?Sized>(
    config: &SamplerConfig,
    chain_id: usize,
    target: &T,
) -> Result<ChainDraws> {
    config.validate()?;
    let warm = warm_start(config, target);
    run_chain_from(config, chain_id, target, warm.as_ref())
}

/// Laplace approximation shared by all chains, when enabled.
fn warm_start<T: LogDensity + ?Sized>(config: &SamplerConfig, target: &T) -> Option<Laplace> {
    if !config.adaptation.warm_start {
        return None;
    }
    // A stream no chain uses.
    let mut rng = stream_rng(config.seed, WARM_START_STREAM);
    let start = (0..config.adaptation.init_attempts.max(1))
        .map(|_| target.initial_point(&mut rng))
        .find(|x| target.log_density(x).is_finite())?;
    Some(laplace(target, &start, config.adaptation.mode_iters))
}

const WARM_START_STREAM: u64 = (1 << 32) + 1;

fn run_chain_from<T: LogDensity + ?Sized>(
    config: &SamplerConfig,
    chain_id: usize,
    target: &T,
    warm: Option<&Laplace>,
) -> Result<ChainDraws> {
    let adapt = &config.adaptation;
    let mut rng = stream_rng(config.seed, chain_id as u64);
    let dim = target.dim();

    let mut x = Vec::new();
    let mut logp = f64::NEG_INFINITY;
    for _ in 0..adapt.init_attempts.max(1) {
        x = match warm {
            Some(lp) => laplace_draw(lp, adapt.init_dispersion, &mut rng),
            None => target.initial_point(&mut rng),
        };
        logp = target.log_density(&x);
        if logp.is_finite() {
            break;
        }
    }
    if let (Some(lp), false) = (warm, logp.is_finite()) {
        x = lp.mode.clone();
        logp = target.log_density(&x);
    }
    if !logp.is_finite() {
        return Err(Error::Numerical(format!(
            "chain {chain_id}: no finite initial point after {} attempts",
            adapt.init_attempts
        )));
    }

    let mut log_lambda = (2.38 / (dim as f64).sqrt()).ln();
    let mut scale = match warm {
        Some(lp) => ProposalScale::with_covariance(&x, lp.cov.clone(), adapt.covariance),
        None => ProposalScale::new(&x, adapt.initial_scale, adapt.covariance),
    };

    let retained = config.retained_per_chain();
    let mut draws = Vec::with_capacity(retained);
    let mut log_density = Vec::with_capacity(retained);
    let mut accepted_burn = 0usize;
    let mut accepted_main = 0usize;
    let mut step = 0usize;
    let mut z = vec![0.0; dim];
    let mut proposal = vec![0.0; dim];

    for iter in 0..config.n_draws {
        let adapting = iter < config.n_burn_in;
        for _ in 0..adapt.steps_per_draw {
            for zj in z.iter_mut() {
                *zj = rng.sample(StandardNormal);
            }
            scale.propose(&x, &z, log_lambda.exp(), &mut proposal);
            let logp_new = target.log_density(&proposal);
            let log_alpha = (logp_new - logp).min(0.0);
            let accept = logp_new.is_finite() && rng.random::<f64>().ln() < log_alpha;
            if accept {
                x.copy_from_slice(&proposal);
                logp = logp_new;
            }
            if adapting {
                accepted_burn += accept as usize;
                let alpha = if logp_new.is_finite() { log_alpha.exp() } else { 0.0 };
                let gamma = ((step + 1) as f64).powf(-adapt.decay);
                log_lambda += gamma * (alpha - adapt.target_acceptance);
                scale.update(&x, 1.0 / (step as f64 + adapt.prior_weight));
                step += 1;
            } else {
                accepted_main += accept as usize;
            }
        }
        if !adapting {
            draws.push(target.constrain_draw(&x)?);
            log_density.push(logp);
        }
    }
    let proposal_sd = scale.marginal_sd(log_lambda.exp());

    let main_steps = (retained * adapt.steps_per_draw).max(1);
    let burn_steps = (config.n_burn_in * adapt.steps_per_draw).max(1);
    let acceptance_rate = accepted_main as f64 / main_steps as f64;
    if acceptance_rate < adapt.min_acceptance {
        return Err(Error::Numerical(format!(
            "chain {chain_id}: acceptance {acceptance_rate:.4} after adaptation is below {}",
            adapt.min_acceptance
        )));
    }
    Ok(ChainDraws {
        chain_id,
        draws,
        log_density,
        acceptance_rate,
        burn_in_acceptance_rate: accepted_burn as f64 / burn_steps as f64,
        proposal_sd,
    })
}

/// `mode + dispersion * L z` with `L L^T` the Laplace covariance.
fn laplace_draw(lp: &Laplace, dispersion: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dim = lp.mode.len();
    let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let l = cholesky(&lp.cov, dim, 1e-12).unwrap_or_else(|| {
        let mut d = vec![0.0; dim * dim];
        for j in 0..dim {
            d[j * dim + j] = lp.cov[j * dim + j].max(0.0).sqrt();
        }
        d
    });
    (0..dim)
        .map(|i| lp.mode[i] + dispersion * (0..=i).map(|k| l[i * dim + k] * z[k]).sum::<f64>())
        .collect()
}

/// Pooled output of all chains with convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub names: Vec<String>,
    pub n_draws: usize,
    pub n_burn_in: usize,
    pub chains: Vec<ChainDraws>,
    /// Split-R-hat per parameter; `NaN` with a single chain.
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
}

impl PosteriorSamples {
    pub fn from_chains(
        names: Vec<String>,
        n_draws: usize,
        n_burn_in: usize,
        chains: Vec<ChainDraws>,
    ) -> Result<Self> {
        ensure!(!chains.is_empty(), InvalidArgument, "no chains");
        let per_chain = chains[0].draws.len();
        ensure!(
            chains.iter().all(|c| c.draws.len() == per_chain),
            InvalidArgument,
            "chains have different lengths"
        );
        ensure!(
            chains.iter().flat_map(|c| &c.draws).all(|d| d.len() == names.len()),
            InvalidArgument,
            "draw width does not match parameter names"
        );
        let mut samples = Self {
            names,
            n_draws,
            n_burn_in,
            chains,
            rhat: Vec::new(),
            ess: Vec::new(),
        };
        let (rhat, ess) = (0..samples.names.len())
            .map(|j| {
                let per_chain = samples.param_chains(j);
                let r = rhat(&per_chain).unwrap_or(f64::NAN);
                (r, ess(&per_chain))
            })
            .unzip();
        samples.rhat = rhat;
        samples.ess = ess;
        Ok(samples)
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Draws of parameter `j`, one vector per chain.
    pub fn param_chains(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.draws.iter().map(|d| d[j]).collect())
            .collect()
    }

    pub fn pooled(&self, j: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.draws.iter().map(move |d| d[j])).collect()
    }

    pub fn draws(&self) -> impl Iterator<Item = &[f64]> {
        self.chains.iter().flat_map(|c| c.draws.iter().map(|d| d.as_slice()))
    }

    /// Empirical quantile of a named parameter over all chains.
    pub fn quantile(&self, name: &str, q: f64) -> Option<f64> {
        let j = self.index_of(name)?;
        Some(quantile(&mut self.pooled(j), q))
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().filter(|r| r.is_finite()).fold(f64::NAN, f64::max)
    }
}

/// Linear-interpolated empirical quantile; sorts `values` in place.
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

/// Runs every chain, in parallel on up to `jobs` threads (all cores when
/// `None`), and pools them.
pub fn run_chains<T: LogDensity + ?Sized>(
    config: &SamplerConfig,
    target: &T,
    jobs: Option<usize>,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let warm = warm_start(config, target);
    let run = || {
        (0..config.n_chains)
            .into_par_iter()
            .map(|id| run_chain_from(config, id, target, warm.as_ref()))
            .collect::<Result<Vec<_>>>()
    };
    let chains = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    PosteriorSamples::from_chains(target.param_names(), config.n_draws, config.n_burn_in, chains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::model::GaussianTarget;

    fn config(n_draws: usize, n_burn_in: usize) -> SamplerConfig {
        SamplerConfig {
            n_chains: 1,
            n_draws,
            n_burn_in,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn recovers_standard_gaussian_moments() {
        let target = GaussianTarget::standard(2);
        let chain = run_chain(&config(11_000, 1_000), 0, &target).unwrap();
        assert_eq!(chain.draws.len(), 10_000);
        let n = chain.draws.len() as f64;
        let mean: Vec<f64> = (0..2).map(|j| chain.draws.iter().map(|d| d[j]).sum::<f64>() / n).collect();
        for m in &mean {
            assert!(m.abs() < 0.1, "mean {m}");
        }
        for a in 0..2 {
            for b in 0..2 {
                let c = chain
                    .draws
                    .iter()
                    .map(|d| (d[a] - mean[a]) * (d[b] - mean[b]))
                    .sum::<f64>()
                    / (n - 1.0);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((c - want).abs() < 0.15, "cov[{a}][{b}] = {c}");
            }
        }
        assert!(chain.acceptance_rate > 0.1 && chain.acceptance_rate < 0.5);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let target = GaussianTarget::standard(3);
        let a = run_chain(&config(600, 100), 2, &target).unwrap();
        let b = run_chain(&config(600, 100), 2, &target).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&config(600, 100), 3, &target).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn rejects_invalid_configs() {
        let target = GaussianTarget::standard(1);
        assert!(run_chain(&config(100, 100), 0, &target).is_err());
        let mut c = config(100, 10);
        c.n_chains = 0;
        assert!(c.validate().is_err());
    }

    struct Nowhere;
    impl LogDensity for Nowhere {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, _: &[f64]) -> f64 {
            f64::NEG_INFINITY
        }
        fn initial_point(&self, _: &mut ChaCha8Rng) -> Vec<f64> {
            vec![0.0]
        }
        fn param_names(&self) -> Vec<String> {
            vec!["x".into()]
        }
        fn constrain_draw(&self, u: &[f64]) -> Result<Vec<f64>> {
            Ok(u.to_vec())
        }
    }

    #[test]
    fn reports_non_finite_initial_point() {
        let err = run_chain(&config(100, 10), 0, &Nowhere).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    /// A density with a narrow spike at the start and no mass elsewhere the
    /// random walk can reach: nothing is ever accepted.
    struct Spike;
    impl LogDensity for Spike {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, u: &[f64]) -> f64 {
            if u[0] == 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        fn initial_point(&self, _: &mut ChaCha8Rng) -> Vec<f64> {
            vec![0.0]
        }
        fn param_names(&self) -> Vec<String> {
            vec!["x".into()]
        }
        fn constrain_draw(&self, u: &[f64]) -> Result<Vec<f64>> {
            Ok(u.to_vec())
        }
    }

    #[test]
    fn aborts_on_collapsed_acceptance() {
        assert!(run_chain(&config(300, 100), 0, &Spike).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let mut v = vec![3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&mut v, 0.0), 1.0);
        assert_eq!(quantile(&mut v, 1.0), 4.0);
        assert_eq!(quantile(&mut v, 0.5), 2.5);
    }
}
