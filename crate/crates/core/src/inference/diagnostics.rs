//! Convergence diagnostics: split-R-hat and effective sample size.

use crate::error::{ensure, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Between/within variance ratio; `1.0` when every chain is constant and
/// equal, `inf` when constant chains disagree.
fn potential_scale_reduction(chains: &[&[f64]]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = chains.iter().map(|c| sample_var(c)).sum::<f64>() / chains.len() as f64;
    let between_over_n = sample_var(&means);
    if within <= 0.0 {
        return if between_over_n <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * within + between_over_n;
    (var_plus / within).sqrt()
}

/// Split-R-hat: every chain is halved and the halves compared.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    ensure!(chains.len() >= 2, InvalidArgument, "split-R-hat needs at least two chains");
    let n = chains[0].len();
    ensure!(n >= 4, InvalidArgument, "split-R-hat needs at least four draws per chain");
    ensure!(
        chains.iter().all(|c| c.len() == n),
        InvalidArgument,
        "chains differ in length"
    );
    let half = n / 2;
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..]])
        .collect();
    Ok(potential_scale_reduction(&halves))
}

/// Multi-chain effective sample size with Geyer's initial monotone
/// sequence estimator.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    if m == 0 || chains[0].len() < 4 {
        return f64::NAN;
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = chains.iter().map(|c| sample_var(c)).sum::<f64>() / m as f64;
    let var_plus = if m > 1 {
        (n as f64 - 1.0) / n as f64 * within + sample_var(&means)
    } else {
        within * (n as f64 - 1.0) / n as f64
    };
    if var_plus <= 0.0 {
        return (m * n) as f64;
    }

    let autocov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| {
                (0..n - lag).map(|i| (c[i] - mu) * (c[i + lag] - mu)).sum::<f64>() / n as f64
            })
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (within - autocov(lag)) / var_plus;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / ((m * n) as f64).log10());
    (m * n) as f64 / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_chains(m: usize, n: usize, offset: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        (0..m)
            .map(|c| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + offset(c)).collect())
            .collect()
    }

    #[test]
    fn constant_equal_chains_give_one() {
        assert_eq!(rhat(&[vec![2.0; 10], vec![2.0; 10]]).unwrap(), 1.0);
    }

    #[test]
    fn same_distribution_is_converged() {
        let chains = gaussian_chains(4, 5000, |_| 0.0);
        assert!(rhat(&chains).unwrap() < 1.01);
        let e = ess(&chains);
        assert!(e > 15_000.0 && e < 25_000.0, "ess {e}");
    }

    #[test]
    fn separated_chains_are_flagged() {
        let chains = gaussian_chains(2, 1000, |c| 10.0 * c as f64);
        assert!(rhat(&chains).unwrap() > 2.0);
    }

    #[test]
    fn input_checks() {
        assert!(rhat(&[vec![1.0, 2.0, 3.0, 4.0]]).is_err());
        assert!(rhat(&[vec![1.0, 2.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn autocorrelation_reduces_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..4000)
                    .map(|_| {
                        x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                        x
                    })
                    .collect()
            })
            .collect();
        // AR(1) with rho = 0.9: tau = (1 + rho) / (1 - rho) = 19.
        let e = ess(&chains);
        let expected = 16_000.0 / 19.0;
        assert!((e / expected - 1.0).abs() < 0.3, "ess {e} vs {expected}");
    }
}
