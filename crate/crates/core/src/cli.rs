//! Command-line front end.
//!
//! Every subcommand reads an optional TOML [`RunConfig`], applies flag
//! overrides and writes its artifacts under the output directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::config::{EvaluationEntry, FeedSource, FileFormat, RunConfig};
use crate::error::{ensure, Error, Result};
use crate::eval::{evaluate_region, write_table_file, EvalInput};
use crate::inference::export::{
    diagnostics, read_forecast_csv, read_posterior_csv, write_forecast_csv, write_json,
    write_posterior_csv, RunManifest,
};
use crate::inference::sampler::stream_rng;
use crate::inference::{posterior_predictive, run_chains, PosteriorModel, Priors};
use crate::ingest::{self, parse_feed_list, FeedKind};
use crate::observation::DelayPmf;
use crate::symptoms::{self, Gazetteer, Lexicon, Pipeline, SymptomClassifier};
use crate::synthetic::{generate, Scenario};

#[derive(Debug, Parser)]
#[command(name = "epifuse", version, about = "Death forecasts from surveillance feeds")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Comma-separated feeds, e.g. deaths,tests,twitter.
    #[arg(long, global = true)]
    pub feeds: Option<String>,
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    /// Iterations per chain including burn-in.
    #[arg(long, global = true)]
    pub draws: Option<usize>,
    #[arg(long = "burn-in", global = true)]
    pub burn_in: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for chains.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Last day of data used (YYYY-MM-DD).
    #[arg(long = "end-date", global = true)]
    pub end_date: Option<NaiveDate>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn raw tweets into daily symptomatic tweet counts.
    Classify {
        /// Newline-delimited JSON tweets.
        #[arg(long)]
        tweets: Option<PathBuf>,
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
    /// Train the skip-gram and SVM classifier on labelled tweets.
    TrainClassifier {
        #[arg(long)]
        tweets: Option<PathBuf>,
        /// Labelled tweets held out for scoring.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Run the MCMC chains.
    Fit,
    /// Posterior predictive deaths after the analysis end.
    Forecast {
        #[arg(long)]
        posterior: Option<PathBuf>,
    },
    /// Score forecasts against observed deaths.
    Evaluate {
        /// Long CSV of observed deaths.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Deaths-only forecast CSV.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Extra forecasts as NAME=PATH.
        #[arg(long = "candidate")]
        candidates: Vec<String>,
    },
    /// Generate a synthetic region from a scenario file.
    Simulate {
        /// Scenario as JSON or TOML.
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value = "synthetic")]
        region: String,
    },
}

/// Applies flag overrides on top of the config file.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(f) = &common.feeds {
        cfg.feeds = parse_feed_list(f)?;
    }
    if let Some(v) = common.chains {
        cfg.sampler.chains = v;
    }
    if let Some(v) = common.draws {
        cfg.sampler.draws = v;
    }
    if let Some(v) = common.burn_in {
        cfg.sampler.burn_in = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.jobs {
        cfg.sampler.jobs = Some(v);
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    if let Some(v) = common.end_date {
        cfg.analysis_end = Some(v);
    }
    if let Some(v) = common.horizon {
        cfg.horizon = v;
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::Config(format!("no {what} given")))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.common)?;
    match cli.command {
        Command::Classify { tweets, classifier } => {
            if tweets.is_some() {
                cfg.symptoms.tweets = tweets;
            }
            if classifier.is_some() {
                cfg.symptoms.classifier = classifier;
            }
            cmd_classify(&cfg).map(|_| ())
        }
        Command::TrainClassifier { tweets, test } => {
            if tweets.is_some() {
                cfg.symptoms.tweets = tweets;
            }
            cmd_train_classifier(&cfg, test.as_deref()).map(|_| ())
        }
        Command::Fit => cmd_fit(&cfg).map(|_| ()),
        Command::Forecast { posterior } => cmd_forecast(&cfg, posterior.as_deref()).map(|_| ()),
        Command::Evaluate { truth, baseline, candidates } => {
            if truth.is_some() || baseline.is_some() || !candidates.is_empty() {
                let candidates = candidates
                    .iter()
                    .map(|c| {
                        c.split_once('=')
                            .map(|(n, p)| (n.to_string(), PathBuf::from(p)))
                            .ok_or_else(|| Error::Config(format!("candidate {c:?} is not NAME=PATH")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                cfg.evaluation = vec![EvaluationEntry {
                    region: cfg.region.clone(),
                    truth: require(&truth, "--truth")?.clone(),
                    baseline: require(&baseline, "--baseline")?.clone(),
                    candidates,
                }];
            }
            cmd_evaluate(&cfg).map(|_| ())
        }
        Command::Simulate { params, region } => cmd_simulate(&cfg, &params, &region).map(|_| ()),
    }
}

/// Parses arguments, runs, and maps errors onto exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().filter_or("EPIFUSE_LOG", "warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("epifuse: {e}");
            e.exit_code()
        }
    }
}

fn build_pipeline(cfg: &RunConfig) -> Result<Pipeline> {
    let s = &cfg.symptoms;
    let classifier = SymptomClassifier::load(require(&s.classifier, "classifier")?)?;
    let lexicon = match &s.lexicon {
        Some(p) => Lexicon::load_tsv(p)?,
        None => Lexicon::builtin(),
    };
    let polygons = match &s.polygons {
        Some(p) => symptoms::load_geojson(p, s.id_property.as_deref().unwrap_or("id"))?,
        None => Vec::new(),
    };
    let gazetteer = match &s.gazetteer {
        Some(p) => Gazetteer::load_tsv(p)?,
        None => Gazetteer::new(),
    };
    let regions = polygons.iter().map(|p| p.region.clone()).collect();
    Ok(Pipeline {
        lexicon,
        classifier,
        polygons,
        gazetteer,
        regions,
    })
}

/// Writes `tweet_counts.json`; returns its path.
pub fn cmd_classify(cfg: &RunConfig) -> Result<PathBuf> {
    let pipeline = build_pipeline(cfg)?;
    let tweets = symptoms::load_tweets(require(&cfg.symptoms.tweets, "tweet file")?)?;
    let counts = pipeline.aggregate_stream(&tweets)?;
    let path = out_dir(cfg)?.join("tweet_counts.json");
    ingest::write_tweet_counts_json(&counts, create(&path)?)?;
    log::info!("wrote {} regions to {}", counts.len(), path.display());
    Ok(path)
}

/// Writes `classifier.json` and `classifier_metrics.json`.
pub fn cmd_train_classifier(cfg: &RunConfig, test: Option<&Path>) -> Result<PathBuf> {
    let tweets = symptoms::load_tweets(require(&cfg.symptoms.tweets, "training tweets")?)?;
    let clf = SymptomClassifier::train(&tweets, &cfg.symptoms.classifier_config(cfg.seed))?;
    let dir = out_dir(cfg)?;
    let path = dir.join("classifier.json");
    clf.save(&path)?;
    let scored = match test {
        Some(p) => symptoms::load_tweets(p)?,
        None => tweets,
    };
    let metrics = clf.evaluate(&scored)?;
    write_json(&metrics, &dir.join("classifier_metrics.json"))?;
    log::info!("classifier macro F1 {:.3}", metrics.f1);
    Ok(path)
}

fn build_model(cfg: &RunConfig) -> Result<PosteriorModel> {
    let bundle = cfg.load_bundle()?;
    let end = cfg.analysis_end_for(&bundle)?;
    let aligned = ingest::align(&bundle, end)?;
    let data = aligned.fit_data(&cfg.active_feeds(), DelayPmf::default())?;
    PosteriorModel::new(data, Priors::default())
}

/// Writes `posterior.csv`, `diagnostics.json` and `manifest.json`; returns
/// the output directory.
pub fn cmd_fit(cfg: &RunConfig) -> Result<PathBuf> {
    let model = build_model(cfg)?;
    let sampler = cfg.sampler_config();
    log::info!(
        "fitting {} with {} parameters, {} chains",
        cfg.region,
        model.layout().dim(),
        sampler.n_chains
    );
    let samples = run_chains(&sampler, &model, cfg.sampler.jobs)?;
    let dir = out_dir(cfg)?;
    write_posterior_csv(&samples, create(&dir.join("posterior.csv"))?)?;
    let diag = diagnostics(&samples);
    if diag.max_rhat > 1.1 {
        log::warn!("max R-hat {:.3}; chains may not have converged", diag.max_rhat);
    }
    write_json(&diag, &dir.join("diagnostics.json"))?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        region: cfg.region.clone(),
        feeds: cfg.active_feeds().iter().map(|k| k.name().to_string()).collect(),
        epoch: model.data.epoch,
        analysis_end: model.data.forecast_start().pred_opt().expect("date after epoch"),
        sampler,
        chain_streams: (0..cfg.sampler.chains as u64).collect(),
        diagnostics: diag,
    };
    write_json(&manifest, &dir.join("manifest.json"))?;
    Ok(dir.to_path_buf())
}

/// Writes `forecast.csv`; returns its path.
pub fn cmd_forecast(cfg: &RunConfig, posterior: Option<&Path>) -> Result<PathBuf> {
    let model = build_model(cfg)?;
    let dir = out_dir(cfg)?;
    let post_path = posterior.map(Path::to_path_buf).unwrap_or_else(|| dir.join("posterior.csv"));
    let file = File::open(&post_path).map_err(|e| Error::io(&post_path, e))?;
    let samples = read_posterior_csv(file, cfg.sampler.draws, cfg.sampler.burn_in)?;
    let forecast = posterior_predictive(&samples, &model, cfg.horizon, cfg.seed)?;
    if forecast.dropped > 0 {
        log::warn!("{} posterior draws failed to simulate", forecast.dropped);
    }
    let path = dir.join("forecast.csv");
    write_forecast_csv(&forecast, create(&path)?)?;
    Ok(path)
}

fn forecast_input(path: &Path, truth: &BTreeMap<NaiveDate, u64>) -> Result<EvalInput> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = read_forecast_csv(file)?;
    ensure!(!rows.is_empty(), Data, "{} has no forecast rows", path.display());
    let mut input = EvalInput { mean: Vec::new(), variance: Vec::new(), truth: Vec::new() };
    for r in rows {
        let t = truth
            .get(&r.date)
            .ok_or_else(|| Error::Data(format!("no observed deaths for {} ({})", r.date, path.display())))?;
        input.mean.push(r.expected_mean);
        input.variance.push(r.expected_variance);
        input.truth.push(*t as f64);
    }
    Ok(input)
}

/// Writes `evaluation.csv`; returns its path.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<PathBuf> {
    ensure!(!cfg.evaluation.is_empty(), Config, "nothing to evaluate");
    let mut rows = Vec::new();
    for entry in &cfg.evaluation {
        let truth_recs = ingest::load_long_csv(&entry.truth, FeedKind::Deaths)?;
        let rec = truth_recs
            .into_iter()
            .find(|r| r.region == entry.region)
            .ok_or_else(|| Error::Data(format!("truth file has no region {:?}", entry.region)))?;
        let truth: BTreeMap<NaiveDate, u64> = rec
            .series
            .iter()
            .filter_map(|(d, v)| v.map(|v| (d, v)))
            .collect();
        let baseline = forecast_input(&entry.baseline, &truth)?;
        let candidates = entry
            .candidates
            .iter()
            .map(|(name, p)| Ok((name.clone(), forecast_input(p, &truth)?)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(evaluate_region(&entry.region, &baseline, &candidates)?);
    }
    let path = out_dir(cfg)?.join("evaluation.csv");
    write_table_file(&rows, &path)?;
    Ok(path)
}

fn write_long_csv(path: &Path, region: &str, start: NaiveDate, counts: &[u64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["region", "date", "count"])?;
    for (i, c) in counts.iter().enumerate() {
        let date = start + chrono::Duration::days(i as i64);
        w.write_record([region, &date.to_string(), &c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes synthetic feeds, held-out deaths (`truth.csv`) and a ready-to-fit
/// `run.toml`; returns the output directory.
pub fn cmd_simulate(cfg: &RunConfig, params: &Path, region: &str) -> Result<PathBuf> {
    let text = std::fs::read_to_string(params).map_err(|e| Error::io(params, e))?;
    let scenario: Scenario = if params.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", params.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", params.display())))?
    };
    let mut rng = stream_rng(cfg.seed, 0);
    let bundle = generate(&scenario, &mut rng)?;
    let dir = out_dir(cfg)?.to_path_buf();
    let observed = |s: &crate::series::CountSeries| s.values.iter().map(|v| v.unwrap_or(0)).collect::<Vec<_>>();

    let mut run = RunConfig {
        region: region.to_string(),
        population: Some(bundle.data.population),
        epoch: scenario.epoch,
        horizon: scenario.horizon.max(1),
        seed: cfg.seed,
        out: PathBuf::from("fit"),
        enforce_start_dates: false,
        sampler: cfg.sampler.clone(),
        ..RunConfig::default()
    };
    let src = |path: &str, format| FeedSource {
        path: path.into(),
        format,
        region_column: "region".into(),
        date_format: "%Y-%m-%d".into(),
    };
    write_long_csv(&dir.join("deaths.csv"), region, scenario.epoch, &observed(&bundle.data.deaths))?;
    run.files.insert("deaths".into(), src("deaths.csv", FileFormat::Long));
    for feed in &bundle.data.feeds {
        let kind: FeedKind = feed.name.parse()?;
        let counts = observed(&feed.counts);
        if kind == FeedKind::Twitter {
            let days = counts
                .iter()
                .enumerate()
                .map(|(i, c)| (scenario.epoch + chrono::Duration::days(i as i64), *c))
                .collect();
            let map = BTreeMap::from([(region.to_string(), days)]);
            ingest::write_tweet_counts_json(&map, create(&dir.join("tweet_counts.json"))?)?;
            run.files.insert(kind.name().into(), src("tweet_counts.json", FileFormat::TweetJson));
        } else {
            let file = format!("{}.csv", kind.name());
            write_long_csv(&dir.join(&file), region, scenario.epoch, &counts)?;
            run.files.insert(kind.name().into(), src(&file, FileFormat::Long));
        }
        run.feeds.push(kind);
    }
    write_long_csv(&dir.join("truth.csv"), region, bundle.data.forecast_start(), &bundle.future_deaths)?;
    write_json(&scenario, &dir.join("scenario.json"))?;
    std::fs::write(dir.join("run.toml"), run.to_toml_string()?).map_err(|e| Error::io(dir.join("run.toml"), e))?;
    Ok(dir)
}
