//! Fits the deaths-only model to a synthetic outbreak and forecasts a week.

use epifuse::inference::{posterior_predictive, run_chains, PosteriorModel, Priors, SamplerConfig};
use epifuse::inference::sampler::stream_rng;
use epifuse::synthetic::{generate, Scenario};

fn main() -> epifuse::Result<()> {
    let scenario = Scenario::demo(100, 7, &[]);
    let bundle = generate(&scenario, &mut stream_rng(42, 0))?;
    let model = PosteriorModel::new(bundle.data, Priors::default())?;
    let config = SamplerConfig { n_chains: 4, n_draws: 2000, n_burn_in: 1000, seed: 42, ..Default::default() };
    let post = run_chains(&config, &model, None)?;

    for name in ["ifr", "latent_period", "infectious_period", "death_phi"] {
        let j = post.index_of(name).unwrap();
        println!(
            "{name:<18} 5% {:>8.4}  50% {:>8.4}  95% {:>8.4}  R-hat {:.3}",
            post.quantile(name, 0.05).unwrap(),
            post.quantile(name, 0.5).unwrap(),
            post.quantile(name, 0.95).unwrap(),
            post.rhat[j]
        );
    }
    println!("true ifr {}", scenario.truth.deaths.ifr);

    let fc = posterior_predictive(&post, &model, 7, 42)?;
    println!("date        truth  mean    95% band");
    for d in 0..fc.horizon {
        let (lo, hi) = fc.central_interval(d, 0.95);
        println!("{}  {:>5}  {:>6.1}  [{lo}, {hi}]", fc.date_at(d), bundle.future_deaths[d], fc.expected_mean[d]);
    }
    Ok(())
}
