//! CSV and JSON export of posterior draws, forecasts and run manifests.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::forecast::ForecastResult;
use super::sampler::{ChainDraws, PosteriorSamples, SamplerConfig};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct DrawRow {
    chain: usize,
    draw: usize,
    param: String,
    value: f64,
}

/// One row per chain x draw x parameter.
pub fn write_posterior_csv<W: Write>(samples: &PosteriorSamples, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for chain in &samples.chains {
        for (i, draw) in chain.draws.iter().enumerate() {
            for (name, value) in samples.names.iter().zip(draw) {
                w.serialize(DrawRow {
                    chain: chain.chain_id,
                    draw: i,
                    param: name.clone(),
                    value: *value,
                })?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<posterior>", e))?;
    Ok(())
}

/// Reads draws written by [`write_posterior_csv`]. Acceptance rates are not
/// stored in the CSV and come back as `NaN`.
pub fn read_posterior_csv<R: Read>(input: R, n_draws: usize, n_burn_in: usize) -> Result<PosteriorSamples> {
    let mut r = csv::Reader::from_reader(input);
    let mut names: Vec<String> = Vec::new();
    let mut chains: BTreeMap<usize, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for row in r.deserialize::<DrawRow>() {
        let row = row?;
        let j = match names.iter().position(|n| *n == row.param) {
            Some(j) => j,
            None => {
                names.push(row.param.clone());
                names.len() - 1
            }
        };
        let draw = chains.entry(row.chain).or_default().entry(row.draw).or_default();
        if draw.len() != j {
            return Err(Error::Data(format!(
                "posterior CSV: parameter {} out of order in chain {} draw {}",
                row.param, row.chain, row.draw
            )));
        }
        draw.push(row.value);
    }
    if chains.is_empty() {
        return Err(Error::Data("posterior CSV holds no draws".into()));
    }
    let chains = chains
        .into_iter()
        .map(|(chain_id, draws)| ChainDraws {
            chain_id,
            draws: draws.into_values().collect(),
            log_density: Vec::new(),
            acceptance_rate: f64::NAN,
            burn_in_acceptance_rate: f64::NAN,
            proposal_sd: Vec::new(),
        })
        .collect();
    PosteriorSamples::from_chains(names, n_draws, n_burn_in, chains)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub date: NaiveDate,
    pub mean: f64,
    pub variance: f64,
    pub expected_mean: f64,
    pub expected_variance: f64,
    pub q025: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub q975: f64,
}

pub fn forecast_rows(f: &ForecastResult) -> Vec<ForecastRow> {
    (0..f.horizon)
        .map(|d| ForecastRow {
            date: f.date_at(d),
            mean: f.mean[d],
            variance: f.variance[d],
            expected_mean: f.expected_mean[d],
            expected_variance: f.expected_variance[d],
            q025: f.quantile(d, 0.025),
            q05: f.quantile(d, 0.05),
            q50: f.quantile(d, 0.5),
            q95: f.quantile(d, 0.95),
            q975: f.quantile(d, 0.975),
        })
        .collect()
}

/// One row per forecast day.
pub fn write_forecast_csv<W: Write>(f: &ForecastResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in forecast_rows(f) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<forecast>", e))?;
    Ok(())
}

pub fn read_forecast_csv<R: Read>(input: R) -> Result<Vec<ForecastRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<ForecastRow>, _>>()?;
    if rows.is_empty() {
        return Err(Error::Data("forecast CSV has no rows".into()));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
    pub mean: f64,
    pub q05: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub acceptance_rates: Vec<f64>,
    pub max_rhat: f64,
    pub params: Vec<ParamDiagnostics>,
}

pub fn diagnostics(samples: &PosteriorSamples) -> Diagnostics {
    let params = samples
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut pooled = samples.pooled(j);
            let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
            ParamDiagnostics {
                name: name.clone(),
                rhat: samples.rhat[j],
                ess: samples.ess[j],
                mean,
                q05: super::sampler::quantile(&mut pooled, 0.05),
                q95: super::sampler::quantile(&mut pooled, 0.95),
            }
        })
        .collect();
    Diagnostics {
        acceptance_rates: samples.chains.iter().map(|c| c.acceptance_rate).collect(),
        max_rhat: samples.max_rhat(),
        params,
    }
}

/// Everything needed to reproduce a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub region: String,
    pub feeds: Vec<String>,
    pub epoch: NaiveDate,
    pub analysis_end: NaiveDate,
    pub sampler: SamplerConfig,
    /// Per-chain generator streams derived from `sampler.seed`.
    pub chain_streams: Vec<u64>,
    pub diagnostics: Diagnostics,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::sampler::ChainDraws;

    fn chain(id: usize, draws: Vec<Vec<f64>>) -> ChainDraws {
        ChainDraws {
            chain_id: id,
            log_density: vec![0.0; draws.len()],
            draws,
            acceptance_rate: 0.3,
            burn_in_acceptance_rate: 0.3,
            proposal_sd: vec![],
        }
    }

    #[test]
    fn posterior_csv_round_trip() {
        let samples = PosteriorSamples::from_chains(
            vec!["a".into(), "b".into()],
            8,
            4,
            vec![
                chain(0, vec![vec![1.0, 2.0], vec![1.5, 2.5], vec![1.1, 2.1], vec![0.9, 1.9]]),
                chain(1, vec![vec![1.2, 2.2], vec![1.4, 2.0], vec![1.0, 2.3], vec![0.8, 2.2]]),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_posterior_csv(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("chain,draw,param,value\n0,0,a,1.0\n"));
        let back = read_posterior_csv(buf.as_slice(), 8, 4).unwrap();
        assert_eq!(back.names, samples.names);
        assert_eq!(
            back.chains.iter().map(|c| &c.draws).collect::<Vec<_>>(),
            samples.chains.iter().map(|c| &c.draws).collect::<Vec<_>>()
        );
    }

    #[test]
    fn empty_posterior_csv_is_a_data_error() {
        let err = read_posterior_csv("chain,draw,param,value\n".as_bytes(), 2, 1).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }
}
