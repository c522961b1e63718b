//! Negative-binomial counts at a fixed mean and decreasing overdispersion.

use epifuse::observation::{negbin_logpmf, negbin_sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> epifuse::Result<()> {
    let mean = 20.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!("phi      P(0)        P(mean)     sample var  theory var");
    for phi in [0.5, 2.0, 10.0, 1e6] {
        let p0 = negbin_logpmf(0, mean, phi)?.exp();
        let pm = negbin_logpmf(mean as u64, mean, phi)?.exp();
        let xs = (0..20_000)
            .map(|_| negbin_sample(&mut rng, mean, phi).map(|k| k as f64))
            .collect::<epifuse::Result<Vec<_>>>()?;
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        println!("{phi:<8} {p0:<11.3e} {pm:<11.4} {v:<11.1} {:.1}", mean + mean * mean / phi);
    }
    Ok(())
}
