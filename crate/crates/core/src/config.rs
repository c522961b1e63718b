//! TOML run configuration.
//!
//! ```toml
//! region = "Utah"
//! profile = "us_state"
//! population = 3205958
//! analysis_end = "2020-09-30"
//! feeds = ["deaths", "twitter"]
//!
//! [files.deaths]
//! path = "deaths_wide.csv"
//! format = "wide_cumulative"
//! region_column = "Province_State"
//! date_format = "%m/%d/%y"
//!
//! [files.twitter]
//! path = "tweet_counts.json"
//! format = "tweet_json"
//!
//! [sampler]
//! chains = 6
//! draws = 2000
//! burn_in = 1000
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::inference::SamplerConfig;
use crate::ingest::{self, FeedKind, FeedRecord, RegionBundle, RegionProfile, WideCsvSchema};
use crate::symptoms::{ClassifierConfig, SkipGramConfig, SvmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    WideCumulative,
    Long,
    TweetJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedSource {
    pub path: PathBuf,
    pub format: FileFormat,
    #[serde(default = "default_region_column")]
    pub region_column: String,
    #[serde(default = "default_date_format")]
    pub date_format: String,
}

fn default_region_column() -> String {
    "region".into()
}

fn default_date_format() -> String {
    "%Y-%m-%d".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub chains: usize,
    pub draws: usize,
    pub burn_in: usize,
    pub steps_per_draw: usize,
    pub jobs: Option<usize>,
    /// Start chains from a Laplace approximation at the posterior mode.
    pub warm_start: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            chains: d.n_chains,
            draws: d.n_draws,
            burn_in: d.n_burn_in,
            steps_per_draw: d.adaptation.steps_per_draw,
            jobs: None,
            warm_start: d.adaptation.warm_start,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymptomsSection {
    /// Newline-delimited JSON tweets.
    pub tweets: Option<PathBuf>,
    /// Trained classifier JSON.
    pub classifier: Option<PathBuf>,
    /// `lang<TAB>keyword` lexicon; the built-in list when unset.
    pub lexicon: Option<PathBuf>,
    pub polygons: Option<PathBuf>,
    /// GeoJSON feature property holding the region id.
    pub id_property: Option<String>,
    /// `name<TAB>region` gazetteer.
    pub gazetteer: Option<PathBuf>,
    pub skipgram: SkipGramConfig,
    pub svm: SvmConfig,
    pub per_class: Option<usize>,
}

impl SymptomsSection {
    pub fn classifier_config(&self, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            skipgram: SkipGramConfig { seed, ..self.skipgram.clone() },
            svm: SvmConfig { seed, ..self.svm.clone() },
            per_class: self.per_class,
            seed,
        }
    }
}

/// Forecasts to score for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationEntry {
    pub region: String,
    /// Long CSV of observed deaths covering the forecast window.
    pub truth: PathBuf,
    /// Deaths-only forecast CSV.
    pub baseline: PathBuf,
    /// Name to forecast CSV, in table column order.
    #[serde(default)]
    pub candidates: Vec<(String, PathBuf)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub region: String,
    pub profile: RegionProfile,
    pub population: Option<f64>,
    pub epoch: NaiveDate,
    pub analysis_end: Option<NaiveDate>,
    pub horizon: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Feeds used in the fit; deaths are always added.
    pub feeds: Vec<FeedKind>,
    /// Treat data before each feed's earliest trusted date as missing.
    pub enforce_start_dates: bool,
    pub files: BTreeMap<String, FeedSource>,
    pub sampler: SamplerSection,
    pub symptoms: SymptomsSection,
    pub evaluation: Vec<EvaluationEntry>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            region: String::new(),
            profile: RegionProfile::World,
            population: None,
            epoch: ingest::default_epoch(),
            analysis_end: None,
            horizon: crate::inference::DEFAULT_HORIZON,
            seed: SamplerConfig::default().seed,
            out: PathBuf::from("out"),
            feeds: vec![FeedKind::Deaths],
            enforce_start_dates: true,
            files: BTreeMap::new(),
            sampler: SamplerSection::default(),
            symptoms: SymptomsSection::default(),
            evaluation: Vec::new(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.out);
        for src in self.files.values_mut() {
            resolve(base, &mut src.path);
        }
        let s = &mut self.symptoms;
        for p in [&mut s.tweets, &mut s.classifier, &mut s.lexicon, &mut s.polygons, &mut s.gazetteer]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        for e in &mut self.evaluation {
            resolve(base, &mut e.truth);
            resolve(base, &mut e.baseline);
            for (_, p) in &mut e.candidates {
                resolve(base, p);
            }
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Active feeds with deaths first.
    pub fn active_feeds(&self) -> Vec<FeedKind> {
        let mut out = vec![FeedKind::Deaths];
        out.extend(self.feeds.iter().copied().filter(|&k| k != FeedKind::Deaths));
        out
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let mut c = SamplerConfig {
            n_chains: self.sampler.chains,
            n_draws: self.sampler.draws,
            n_burn_in: self.sampler.burn_in,
            seed: self.seed,
            ..SamplerConfig::default()
        };
        c.adaptation.steps_per_draw = self.sampler.steps_per_draw;
        c.adaptation.warm_start = self.sampler.warm_start;
        c
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.region.is_empty(), Config, "no region configured");
        ensure!(self.horizon >= 1, Config, "horizon must be at least 1");
        for key in self.files.keys() {
            key.parse::<FeedKind>()?;
        }
        for kind in self.active_feeds() {
            ensure!(
                self.files.contains_key(kind.name()),
                Config,
                "feed {kind} is active but [files.{kind}] is missing"
            );
        }
        if let Some(p) = self.population {
            ensure!(p > 0.0 && p.is_finite(), Config, "population must be positive");
        }
        self.sampler_config().validate()
    }

    fn load_record(&self, kind: FeedKind) -> Result<FeedRecord> {
        let src = &self.files[kind.name()];
        let records = match src.format {
            FileFormat::WideCumulative => {
                let schema = WideCsvSchema {
                    region_column: src.region_column.clone(),
                    date_format: src.date_format.clone(),
                };
                ingest::load_wide_csv(&src.path, &schema, kind)?.records
            }
            FileFormat::Long => ingest::load_long_csv(&src.path, kind)?,
            FileFormat::TweetJson => {
                ensure!(
                    kind == FeedKind::Twitter,
                    Config,
                    "tweet_json format only applies to the twitter feed"
                );
                ingest::load_tweet_counts_json(&src.path, None)?
            }
        };
        let rec = records
            .into_iter()
            .find(|r| r.region == self.region)
            .ok_or_else(|| {
                Error::Data(format!("{} has no region {:?}", src.path.display(), self.region))
            })?;
        Ok(if self.enforce_start_dates {
            rec.with_profile_floor(self.profile)
        } else {
            rec
        })
    }

    /// Loads every active feed for the configured region.
    pub fn load_bundle(&self) -> Result<RegionBundle> {
        self.validate()?;
        let population = self
            .population
            .ok_or_else(|| Error::Config("population is required to fit".into()))?;
        let mut bundle = RegionBundle::new(self.region.clone(), population, self.epoch);
        for kind in self.active_feeds() {
            bundle.insert(self.load_record(kind)?)?;
        }
        bundle.validate()?;
        Ok(bundle)
    }

    /// The configured analysis end, or the last day of deaths data.
    pub fn analysis_end_for(&self, bundle: &RegionBundle) -> Result<NaiveDate> {
        if let Some(d) = self.analysis_end {
            return Ok(d);
        }
        let deaths = &bundle.feeds[&FeedKind::Deaths].series;
        ensure!(!deaths.is_empty(), Data, "deaths series is empty");
        Ok(deaths.date_at(deaths.len() - 1))
    }

    pub fn region_set(&self) -> BTreeSet<String> {
        [self.region.clone()].into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_example() {
        let src = r#"
            region = "Utah"
            profile = "us_state"
            population = 3205958
            analysis_end = "2020-09-30"
            feeds = ["twitter"]
            [files.deaths]
            path = "d.csv"
            format = "wide_cumulative"
            region_column = "Province_State"
            date_format = "%m/%d/%y"
            [files.twitter]
            path = "/abs/t.json"
            format = "tweet_json"
            [sampler]
            chains = 4
            draws = 300
            burn_in = 100
            [[evaluation]]
            region = "Utah"
            truth = "truth.csv"
            baseline = "f0.csv"
            candidates = [["twitter", "f1.csv"]]
        "#;
        let mut c = RunConfig::from_toml_str(src).unwrap();
        c.resolve_paths(Path::new("/cfg"));
        assert_eq!(c.active_feeds(), vec![FeedKind::Deaths, FeedKind::Twitter]);
        assert_eq!(c.files["deaths"].path, PathBuf::from("/cfg/d.csv"));
        assert_eq!(c.files["twitter"].path, PathBuf::from("/abs/t.json"));
        assert_eq!(c.sampler_config().n_chains, 4);
        assert_eq!(c.evaluation[0].candidates[0].1, PathBuf::from("/cfg/f1.csv"));
        assert_eq!(c.horizon, 7);
        c.validate().unwrap();
    }

    #[test]
    fn config_errors() {
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("profile = \"mars\"").is_err());
        let c = RunConfig::from_toml_str("region = \"X\"").unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let c = RunConfig::from_toml_str("region = \"X\"\nhorizon = 0").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig { region: "R".into(), population: Some(1e6), ..Default::default() };
        c.files.insert(
            "deaths".into(),
            FeedSource {
                path: "d.csv".into(),
                format: FileFormat::Long,
                region_column: default_region_column(),
                date_format: default_date_format(),
            },
        );
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
