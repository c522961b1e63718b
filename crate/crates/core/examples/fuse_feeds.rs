//! Compares deaths-only and deaths-plus-feed forecasts after a change in
//! transmission that deaths have not yet shown.

use epifuse::eval::mae;
use epifuse::inference::sampler::stream_rng;
use epifuse::inference::{posterior_predictive, run_chains, FitData, PosteriorModel, Priors, SamplerConfig};
use epifuse::synthetic::{generate, Scenario};

fn forecast_mae(data: FitData, truth: &[u64]) -> epifuse::Result<f64> {
    let model = PosteriorModel::new(data, Priors::default())?;
    let config = SamplerConfig { n_chains: 4, seed: 3, ..Default::default() };
    let post = run_chains(&config, &model, None)?;
    let fc = posterior_predictive(&post, &model, truth.len(), 3)?;
    let y: Vec<f64> = truth.iter().map(|&v| v as f64).collect();
    mae(&fc.expected_mean, &y)
}

fn main() -> epifuse::Result<()> {
    let scenario = Scenario::demo(120, 7, &[("twitter", 0.05)]);
    for rep in 0..3 {
        let bundle = generate(&scenario, &mut stream_rng(100 + rep, 0))?;
        let mut deaths_only = bundle.data.clone();
        deaths_only.feeds.clear();
        let base = forecast_mae(deaths_only, &bundle.future_deaths)?;
        let fused = forecast_mae(bundle.data, &bundle.future_deaths)?;
        println!("replicate {rep}: deaths-only MAE {base:.2}, with twitter {fused:.2}");
    }
    Ok(())
}
