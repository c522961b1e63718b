//! Symptom-tweet pipeline: filtering, embedding, classification,
//! geolocation and daily aggregation into tweet-count feeds.
//!
//! Labels follow a five-way scheme where class 1 is "not about the author
//! having symptoms" and classes 2 to 5 are the symptomatic categories.

mod geo;
mod skipgram;
mod svm;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, NaiveDate, Timelike, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use geo::{check_coordinates, geolocate, load_geojson, normalize_place, read_geojson, Gazetteer, RegionPolygon};
pub use skipgram::{cosine, train_skipgram, SkipGramConfig, SkipGramModel};
pub use svm::{
    balance_classes, classification_metrics, evaluate_classifier, train_svm, ClassifierMetrics,
    SvmConfig, SvmModel,
};
pub use text::{drop_retweets, is_retweet, keyword_filter, tokenize, Lexicon, EXPLICIT_TERMS};

use crate::error::{ensure, Error, Result};

pub type Label = u8;
pub const N_CLASSES: usize = 5;
/// Fifteen-minute periods per day.
pub const PERIODS_PER_DAY: u32 = 96;

/// One tweet record as read from newline-delimited JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub text: String,
    #[serde(default = "default_lang")]
    pub lang: String,
    /// Platform retweet flag.
    #[serde(default)]
    pub retweeted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
    /// Annotated class, present in training data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

fn default_lang() -> String {
    "en".into()
}

impl Default for Tweet {
    fn default() -> Self {
        Self {
            text: String::new(),
            lang: default_lang(),
            retweeted: false,
            lon: None,
            lat: None,
            profile_location: None,
            timestamp: None,
            label: None,
        }
    }
}

impl Tweet {
    pub fn point(&self) -> Option<(f64, f64)> {
        self.lon.zip(self.lat)
    }
}

pub fn read_tweets(input: impl Read) -> Result<Vec<Tweet>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| Error::Data(format!("tweet line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Tweet = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("tweet line {}: {e}", i + 1)))?;
        if let Some(l) = t.label {
            ensure!(
                (1..=N_CLASSES as Label).contains(&l),
                Data,
                "tweet line {}: label {l} outside 1..={N_CLASSES}",
                i + 1
            );
        }
        out.push(t);
    }
    Ok(out)
}

pub fn load_tweets(path: &Path) -> Result<Vec<Tweet>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tweets(f)
}

pub fn write_tweets(tweets: &[Tweet], mut out: impl std::io::Write) -> Result<()> {
    for t in tweets {
        serde_json::to_writer(&mut out, t)?;
        writeln!(out).map_err(|e| Error::io("<tweets>", e))?;
    }
    Ok(())
}

/// Tweets in classes 2 to 5.
pub fn symptomatic_count(labels: &[Label]) -> usize {
    labels.iter().filter(|&&l| (2..=5).contains(&l)).count()
}

/// Scales a day's count up for offline fifteen-minute periods.
pub fn correct_for_downtime(count: f64, downtime_periods: u32) -> Result<f64> {
    ensure!(
        downtime_periods < PERIODS_PER_DAY,
        InvalidArgument,
        "downtime of {downtime_periods} periods leaves no observed time"
    );
    Ok(count * PERIODS_PER_DAY as f64 / (PERIODS_PER_DAY - downtime_periods) as f64)
}

/// Fifteen-minute periods of `day` (UTC) without any recorded tweet.
pub fn downtime_periods(timestamps: &[DateTime<Utc>], day: NaiveDate) -> u32 {
    let mut seen = [false; PERIODS_PER_DAY as usize];
    for ts in timestamps.iter().filter(|t| t.date_naive() == day) {
        seen[(ts.hour() * 4 + ts.minute() / 15) as usize] = true;
    }
    seen.iter().filter(|&&s| !s).count() as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub skipgram: SkipGramConfig,
    pub svm: SvmConfig,
    /// Resample every class to this size before SVM training; the largest
    /// class size when unset.
    pub per_class: Option<usize>,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            skipgram: SkipGramConfig::default(),
            svm: SvmConfig::default(),
            per_class: None,
            seed: 1,
        }
    }
}

/// Skip-gram embeddings plus the SVM trained on pooled tweet vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymptomClassifier {
    pub skipgram: SkipGramModel,
    pub svm: SvmModel,
}

impl SymptomClassifier {
    /// Trains on labelled tweets; unlabelled ones only feed the embeddings.
    pub fn train(tweets: &[Tweet], config: &ClassifierConfig) -> Result<Self> {
        let corpus: Vec<Vec<String>> = tweets.iter().map(|t| tokenize(&t.text)).collect();
        let skipgram = train_skipgram(&corpus, &config.skipgram)?;
        let labelled: Vec<(usize, Label)> = tweets
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.label.map(|l| (i, l)))
            .collect();
        ensure!(!labelled.is_empty(), Data, "no labelled tweets to train on");
        let largest = {
            let mut h = [0usize; N_CLASSES];
            labelled.iter().for_each(|&(_, l)| h[l as usize - 1] += 1);
            h.into_iter().max().unwrap_or(0)
        };
        let balanced = balance_classes(&labelled, |x| x.1, config.per_class.unwrap_or(largest), config.seed);
        let vectors: Vec<Vec<f64>> = balanced.iter().map(|&(i, _)| skipgram.vectorize_tokens(&corpus[i])).collect();
        let labels: Vec<Label> = balanced.iter().map(|x| x.1).collect();
        let svm = train_svm(&vectors, &labels, &config.svm)?;
        Ok(Self { skipgram, svm })
    }

    pub fn classify(&self, text: &str) -> Label {
        self.svm.classify(&self.skipgram.vectorize(text))
    }

    pub fn evaluate(&self, tweets: &[Tweet]) -> Result<ClassifierMetrics> {
        let (pred, truth): (Vec<Label>, Vec<Label>) = tweets
            .iter()
            .filter_map(|t| t.label.map(|l| (self.classify(&t.text), l)))
            .unzip();
        classification_metrics(&pred, &truth)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut m: Self = serde_json::from_reader(BufReader::new(f))?;
        m.skipgram.reindex();
        ensure!(
            m.svm.dim == m.skipgram.dim && m.svm.weights.len() == N_CLASSES,
            Data,
            "classifier file is inconsistent"
        );
        Ok(m)
    }
}

/// Everything needed to turn raw tweets into per-region counts.
pub struct Pipeline {
    pub lexicon: Lexicon,
    pub classifier: SymptomClassifier,
    pub polygons: Vec<RegionPolygon>,
    pub gazetteer: Gazetteer,
    /// Regions reported even when they have no tweets.
    pub regions: BTreeSet<String>,
}

impl Pipeline {
    /// Symptomatic label and region of a tweet that survives filtering.
    fn route(&self, tweet: &Tweet) -> Option<&str> {
        if is_retweet(tweet) || !keyword_filter(&tweet.text, &tweet.lang, &self.lexicon) {
            return None;
        }
        if symptomatic_count(&[self.classifier.classify(&tweet.text)]) == 0 {
            return None;
        }
        match geolocate(tweet.point(), tweet.profile_location.as_deref(), &self.polygons, &self.gazetteer) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("skipping tweet: {e}");
                None
            }
        }
    }

    /// Downtime-corrected symptomatic counts for one day of tweets.
    ///
    /// Returns `None` for a full-day outage.
    pub fn aggregate_daily(&self, tweets: &[Tweet], downtime: u32) -> Result<Option<BTreeMap<String, f64>>> {
        if downtime >= PERIODS_PER_DAY {
            return Ok(None);
        }
        let mut counts: BTreeMap<String, f64> = self.regions.iter().map(|r| (r.clone(), 0.0)).collect();
        for region in tweets.iter().filter_map(|t| self.route(t)) {
            *counts.entry(region.to_string()).or_default() += 1.0;
        }
        for c in counts.values_mut() {
            *c = correct_for_downtime(*c, downtime)?;
        }
        Ok(Some(counts))
    }

    /// Splits timestamped tweets into UTC days, measures each day's downtime
    /// from all recorded tweets, and rounds corrected counts half up.
    pub fn aggregate_stream(&self, tweets: &[Tweet]) -> Result<BTreeMap<String, BTreeMap<NaiveDate, u64>>> {
        let mut by_day: BTreeMap<NaiveDate, Vec<&Tweet>> = BTreeMap::new();
        for (i, t) in tweets.iter().enumerate() {
            let ts = t
                .timestamp
                .ok_or_else(|| Error::Data(format!("tweet {} has no timestamp", i + 1)))?;
            by_day.entry(ts.date_naive()).or_default().push(t);
        }
        let mut out: BTreeMap<String, BTreeMap<NaiveDate, u64>> =
            self.regions.iter().map(|r| (r.clone(), BTreeMap::new())).collect();
        for (day, day_tweets) in by_day {
            let stamps: Vec<DateTime<Utc>> = day_tweets.iter().filter_map(|t| t.timestamp).collect();
            let downtime = downtime_periods(&stamps, day);
            let owned: Vec<Tweet> = day_tweets.into_iter().cloned().collect();
            if let Some(counts) = self.aggregate_daily(&owned, downtime)? {
                for (region, c) in counts {
                    out.entry(region).or_default().insert(day, (c + 0.5).floor() as u64);
                }
            }
        }
        Ok(out)
    }
}

/// A synthetic labelled corpus where each class has its own vocabulary.
///
/// Every tweet mixes four class words with shared filler words and a
/// symptom keyword, so the classes are separable only through the
/// class-specific tokens.
pub fn synthetic_corpus(per_class: usize, seed: u64) -> Vec<Tweet> {
    const CLASS_WORDS: usize = 12;
    const FILLER_WORDS: usize = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_class * N_CLASSES);
    for label in 1..=N_CLASSES as Label {
        for _ in 0..per_class {
            let mut words: Vec<String> = Vec::with_capacity(11);
            for _ in 0..4 {
                words.push(format!("c{label}w{}", rng.random_range(0..CLASS_WORDS)));
            }
            for _ in 0..6 {
                words.push(format!("f{}", rng.random_range(0..FILLER_WORDS)));
            }
            words.push("fever".into());
            words.shuffle(&mut rng);
            out.push(Tweet {
                text: words.join(" "),
                label: Some(label),
                ..Tweet::default()
            });
        }
    }
    out.shuffle(&mut rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn symptomatic_sum() {
        assert_eq!(symptomatic_count(&[1, 1, 1]), 0);
        assert_eq!(symptomatic_count(&[1, 2, 3, 4, 5]), 4);
        assert_eq!(symptomatic_count(&[]), 0);
    }

    #[test]
    fn downtime_formula() {
        assert_eq!(correct_for_downtime(100.0, 0).unwrap(), 100.0);
        assert!((correct_for_downtime(90.0, 8).unwrap() - 98.181_818_181_818_18).abs() < 1e-9);
        assert_eq!(correct_for_downtime(0.0, 95).unwrap(), 0.0);
        assert!(correct_for_downtime(1.0, 96).is_err());
        let mut prev = 0.0;
        for d in 0..96 {
            let c = correct_for_downtime(10.0, d).unwrap();
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn downtime_detection() {
        let day = NaiveDate::from_ymd_opt(2020, 5, 1).unwrap();
        let at = |h, m| Utc.with_ymd_and_hms(2020, 5, 1, h, m, 0).unwrap();
        assert_eq!(downtime_periods(&[], day), 96);
        let all: Vec<_> = (0..96).map(|p| at(p / 4, (p % 4) * 15 + 3)).collect();
        assert_eq!(downtime_periods(&all, day), 0);
        assert_eq!(downtime_periods(&[at(0, 0), at(0, 14), at(23, 59)], day), 94);
    }

    #[test]
    fn tweets_ndjson_round_trip() {
        let ts = vec![
            Tweet { text: "a".into(), lang: "en".into(), label: Some(2), ..Default::default() },
            Tweet { text: "b".into(), lang: "es".into(), lon: Some(1.0), lat: Some(2.0), ..Default::default() },
        ];
        let mut buf = Vec::new();
        write_tweets(&ts, &mut buf).unwrap();
        assert_eq!(read_tweets(buf.as_slice()).unwrap(), ts);
        assert!(read_tweets(r#"{"text":"x","label":9}"#.as_bytes()).is_err());
        assert_eq!(read_tweets(r#"{"text":"x"}"#.as_bytes()).unwrap()[0].lang, "en");
    }
}
