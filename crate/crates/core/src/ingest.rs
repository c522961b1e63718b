//! Loading, validating and date-aligning surveillance feeds.
//!
//! Three input shapes are supported: dashboard-style wide CSV files holding
//! cumulative counts (one row per region, one column per date), long CSV
//! files with `region,date,count` rows of daily counts, and the tweet-count
//! JSON object `{region: {date: count}}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::inference::FitData;
use crate::observation::DelayPmf;
use crate::series::{parse_date, CountSeries};

/// Model time zero for every region.
pub fn default_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 2, 17).expect("valid date")
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedKind {
    Deaths,
    Tests,
    Twitter,
    Hospital,
    Zoe,
    Calls111,
    Online111,
}

impl FeedKind {
    pub const ALL: [FeedKind; 7] = [
        FeedKind::Deaths,
        FeedKind::Tests,
        FeedKind::Twitter,
        FeedKind::Hospital,
        FeedKind::Zoe,
        FeedKind::Calls111,
        FeedKind::Online111,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeedKind::Deaths => "deaths",
            FeedKind::Tests => "tests",
            FeedKind::Twitter => "twitter",
            FeedKind::Hospital => "hospital",
            FeedKind::Zoe => "zoe",
            FeedKind::Calls111 => "calls111",
            FeedKind::Online111 => "online111",
        }
    }

    /// Earliest date the feed is trusted for a region profile.
    pub fn earliest_start(self, profile: RegionProfile) -> NaiveDate {
        match self {
            FeedKind::Deaths => ymd(2020, 3, 24),
            FeedKind::Tests => ymd(2020, 3, 1),
            FeedKind::Twitter => match profile {
                RegionProfile::NhsRegion => ymd(2020, 4, 9),
                RegionProfile::UsState | RegionProfile::World => ymd(2020, 4, 13),
            },
            FeedKind::Hospital => ymd(2020, 3, 19),
            FeedKind::Zoe => ymd(2020, 5, 12),
            FeedKind::Calls111 | FeedKind::Online111 => ymd(2020, 3, 18),
        }
    }
}

impl fmt::Display for FeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeedKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        FeedKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feed kind {s:?}")))
    }
}

/// Parses a comma-separated feed list such as `deaths,tests,twitter`.
pub fn parse_feed_list(s: &str) -> Result<Vec<FeedKind>> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let kind = part.parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionProfile {
    UsState,
    World,
    NhsRegion,
}

impl FromStr for RegionProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "us_state" => Ok(RegionProfile::UsState),
            "world" => Ok(RegionProfile::World),
            "nhs_region" => Ok(RegionProfile::NhsRegion),
            other => Err(Error::Config(format!("unknown region profile {other:?}"))),
        }
    }
}

/// One feed for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedRecord {
    pub kind: FeedKind,
    pub region: String,
    pub series: CountSeries,
    /// Days before this date are treated as missing.
    pub start: NaiveDate,
}

impl FeedRecord {
    pub fn new(kind: FeedKind, region: impl Into<String>, series: CountSeries) -> Self {
        let start = series.start;
        Self {
            kind,
            region: region.into(),
            series,
            start,
        }
    }

    /// Moves the declared start forward to the profile's floor if needed.
    pub fn with_profile_floor(mut self, profile: RegionProfile) -> Self {
        self.start = self.start.max(self.kind.earliest_start(profile));
        self
    }
}

/// All feeds for one region on a shared calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionBundle {
    pub region: String,
    pub population: f64,
    pub epoch: NaiveDate,
    pub feeds: BTreeMap<FeedKind, FeedRecord>,
}

impl RegionBundle {
    pub fn new(region: impl Into<String>, population: f64, epoch: NaiveDate) -> Self {
        Self {
            region: region.into(),
            population,
            epoch,
            feeds: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, record: FeedRecord) -> Result<()> {
        ensure!(
            record.region == self.region,
            Data,
            "{} feed is for region {:?}, bundle is {:?}",
            record.kind,
            record.region,
            self.region
        );
        ensure!(
            !self.feeds.contains_key(&record.kind),
            Data,
            "duplicate {} feed for {:?}",
            record.kind,
            self.region
        );
        self.feeds.insert(record.kind, record);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.population > 0.0 && self.population.is_finite(),
            Config,
            "population must be positive, got {}",
            self.population
        );
        ensure!(
            self.feeds.contains_key(&FeedKind::Deaths),
            Data,
            "region {:?} has no deaths feed",
            self.region
        );
        Ok(())
    }

    /// Builds the sampler input from an aligned bundle.
    ///
    /// `feeds` lists the auxiliary feeds to include; deaths are always used.
    pub fn fit_data(&self, feeds: &[FeedKind], delay: DelayPmf) -> Result<FitData> {
        self.validate()?;
        let deaths = &self.feeds[&FeedKind::Deaths];
        let mut data = FitData::new(self.epoch, self.population, deaths.series.clone());
        data.delay = delay;
        for &kind in feeds.iter().filter(|&&k| k != FeedKind::Deaths) {
            let rec = self.feeds.get(&kind).ok_or_else(|| {
                Error::Data(format!("region {:?} has no {kind} feed", self.region))
            })?;
            data = data.with_feed(kind.name(), rec.series.clone());
        }
        data.validate()?;
        Ok(data)
    }
}

/// Truncates every feed to `[epoch, analysis_end]` on the epoch calendar.
///
/// Days outside a feed's coverage, or before its declared start, become
/// missing rather than zero.
pub fn align(bundle: &RegionBundle, analysis_end: NaiveDate) -> Result<RegionBundle> {
    ensure!(
        analysis_end >= bundle.epoch,
        Config,
        "analysis end {analysis_end} is before the epoch {}",
        bundle.epoch
    );
    let n = (analysis_end - bundle.epoch).num_days() as usize + 1;
    let mut out = RegionBundle::new(bundle.region.clone(), bundle.population, bundle.epoch);
    for rec in bundle.feeds.values() {
        let values = (0..n)
            .map(|i| {
                let date = bundle.epoch + Duration::days(i as i64);
                if date < rec.start {
                    None
                } else {
                    rec.series.get(date).copied().flatten()
                }
            })
            .collect();
        let start = rec.start.max(bundle.epoch);
        out.feeds.insert(
            rec.kind,
            FeedRecord {
                kind: rec.kind,
                region: rec.region.clone(),
                series: CountSeries::new(bundle.epoch, values),
                start,
            },
        );
    }
    Ok(out)
}

/// Number of leading missing days in a series.
pub fn leading_missing(series: &CountSeries) -> usize {
    series.values.iter().take_while(|v| v.is_none()).count()
}

/// Layout of a wide cumulative CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WideCsvSchema {
    /// Header of the column holding region ids.
    pub region_column: String,
    /// chrono format of the date headers.
    pub date_format: String,
}

impl Default for WideCsvSchema {
    fn default() -> Self {
        Self {
            region_column: "region".into(),
            date_format: "%Y-%m-%d".into(),
        }
    }
}

/// Records parsed from one file plus the number of clamped revisions.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub records: Vec<FeedRecord>,
    pub clamped: usize,
}

/// First differences of a cumulative series; drops are clamped to zero.
///
/// A missing cumulative value makes that day and the next one missing.
/// Returns the daily series and the number of clamped days.
pub fn cumulative_to_daily(cumulative: &[Option<u64>]) -> (Vec<Option<u64>>, usize) {
    let mut clamped = 0;
    let mut prev = Some(0u64);
    let daily = cumulative
        .iter()
        .map(|&c| {
            let d = match (prev, c) {
                (Some(p), Some(c)) => {
                    if c < p {
                        clamped += 1;
                    }
                    Some(c.saturating_sub(p))
                }
                _ => None,
            };
            prev = c;
            d
        })
        .collect();
    (daily, clamped)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_count(cell: &str, what: impl fmt::Display) -> Result<Option<u64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    if let Ok(v) = cell.parse::<u64>() {
        return Ok(Some(v));
    }
    match cell.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => Ok(Some(v as u64)),
        Ok(v) if v < 0.0 => Err(Error::Data(format!("negative count {v} in {what}"))),
        _ => Err(Error::Data(format!("non-numeric cell {cell:?} in {what}"))),
    }
}

pub fn load_wide_csv(path: &Path, schema: &WideCsvSchema, kind: FeedKind) -> Result<Loaded> {
    read_wide_csv(open(path)?, schema, kind)
}

/// Parses a wide cumulative CSV: one row per region, consecutive daily date
/// columns following any metadata columns.
pub fn read_wide_csv(input: impl Read, schema: &WideCsvSchema, kind: FeedKind) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let region_col = headers
        .iter()
        .position(|h| h == schema.region_column)
        .ok_or_else(|| Error::Data(format!("no {:?} column", schema.region_column)))?;

    let parse = |h: &str| NaiveDate::parse_from_str(h, &schema.date_format).ok();
    let first_date_col = headers
        .iter()
        .enumerate()
        .position(|(i, h)| i != region_col && parse(h).is_some())
        .ok_or_else(|| Error::Data("no date columns".into()))?;
    let mut dates = Vec::new();
    for (i, h) in headers.iter().enumerate().skip(first_date_col) {
        ensure!(i != region_col, Data, "region column inside the date columns");
        let date = parse(h).ok_or_else(|| Error::Data(format!("malformed date header {h:?}")))?;
        if let Some(&last) = dates.last() {
            ensure!(
                date == last + Duration::days(1),
                Data,
                "date columns not consecutive: {last} then {date}"
            );
        }
        dates.push(date);
    }
    let start = dates[0];

    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    let mut clamped = 0;
    for row in rdr.records() {
        let row = row?;
        let region = row.get(region_col).unwrap_or("").to_string();
        ensure!(!region.is_empty(), Data, "empty region id on line {:?}", row.position().map(|p| p.line()));
        ensure!(seen.insert(region.clone()), Data, "duplicate region row {region:?}");
        ensure!(
            row.len() == headers.len(),
            Data,
            "region {region:?} has {} cells, header has {}",
            row.len(),
            headers.len()
        );
        let cumulative = (first_date_col..row.len())
            .map(|i| parse_count(&row[i], format_args!("{region:?} on {}", dates[i - first_date_col])))
            .collect::<Result<Vec<_>>>()?;
        let (daily, n) = cumulative_to_daily(&cumulative);
        if n > 0 {
            log::warn!("{kind} {region:?}: clamped {n} negative daily values to zero");
        }
        clamped += n;
        records.push(FeedRecord::new(kind, region, CountSeries::new(start, daily)));
    }
    Ok(Loaded { records, clamped })
}

pub fn load_long_csv(path: &Path, kind: FeedKind) -> Result<Vec<FeedRecord>> {
    read_long_csv(open(path)?, kind)
}

#[derive(Deserialize)]
struct LongRow {
    region: String,
    date: String,
    count: String,
}

/// Parses `region,date,count` rows of daily counts in any order.
pub fn read_long_csv(input: impl Read, kind: FeedKind) -> Result<Vec<FeedRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut by_region: BTreeMap<String, BTreeMap<NaiveDate, Option<u64>>> = BTreeMap::new();
    for row in rdr.deserialize::<LongRow>() {
        let row = row?;
        let date = parse_date(&row.date)?;
        let count = parse_count(&row.count, format_args!("{:?} on {date}", row.region))?;
        let days = by_region.entry(row.region.clone()).or_default();
        ensure!(
            days.insert(date, count).is_none(),
            Data,
            "duplicate row for {:?} on {date}",
            row.region
        );
    }
    Ok(by_region
        .into_iter()
        .map(|(region, days)| FeedRecord::new(kind, region, dense_series(&days)))
        .collect())
}

fn dense_series(days: &BTreeMap<NaiveDate, Option<u64>>) -> CountSeries {
    let (Some((&first, _)), Some((&last, _))) = (days.first_key_value(), days.last_key_value())
    else {
        unreachable!("dense_series called with no days");
    };
    let n = (last - first).num_days() as usize + 1;
    let values = (0..n)
        .map(|i| days.get(&(first + Duration::days(i as i64))).copied().flatten())
        .collect();
    CountSeries::new(first, values)
}

/// JSON object that rejects repeated keys instead of keeping the last one.
struct UniqueMap<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for UniqueMap<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V_<V>(std::marker::PhantomData<V>);
        impl<'de, V: Deserialize<'de>> Visitor<'de> for V_<V> {
            type Value = UniqueMap<V>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    if !seen.insert(k.clone()) {
                        return Err(de::Error::custom(format!("duplicate key {k:?}")));
                    }
                    out.push((k, v));
                }
                Ok(UniqueMap(out))
            }
        }
        d.deserialize_map(V_(std::marker::PhantomData))
    }
}

pub fn load_tweet_counts_json(
    path: &Path,
    known_regions: Option<&BTreeSet<String>>,
) -> Result<Vec<FeedRecord>> {
    read_tweet_counts_json(open(path)?, known_regions)
}

/// Parses `{region: {date: count}}`. Fractional counts are rounded half up.
///
/// With `known_regions` set, any other region id is an error.
pub fn read_tweet_counts_json(
    input: impl Read,
    known_regions: Option<&BTreeSet<String>>,
) -> Result<Vec<FeedRecord>> {
    let parsed: UniqueMap<UniqueMap<f64>> = serde_json::from_reader(input)?;
    let mut out = Vec::new();
    for (region, days) in parsed.0 {
        if let Some(known) = known_regions {
            ensure!(known.contains(&region), Data, "unknown region {region:?}");
        }
        if days.0.is_empty() {
            continue;
        }
        let mut map = BTreeMap::new();
        for (date, count) in days.0 {
            let date = parse_date(&date)?;
            ensure!(
                count.is_finite() && count >= 0.0,
                Data,
                "invalid tweet count {count} for {region:?} on {date}"
            );
            map.insert(date, Some((count + 0.5).floor() as u64));
        }
        out.push(FeedRecord::new(FeedKind::Twitter, region, dense_series(&map)));
    }
    Ok(out)
}

/// Serializes per-region daily counts as the tweet-count JSON object.
pub fn write_tweet_counts_json(
    counts: &BTreeMap<String, BTreeMap<NaiveDate, u64>>,
    out: impl std::io::Write,
) -> Result<()> {
    let obj: BTreeMap<&String, BTreeMap<String, u64>> = counts
        .iter()
        .map(|(r, days)| (r, days.iter().map(|(d, c)| (d.to_string(), *c)).collect()))
        .collect();
    serde_json::to_writer_pretty(out, &obj)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: u32, day: u32) -> NaiveDate {
        ymd(2020, m, day)
    }

    fn opt(v: &[u64]) -> Vec<Option<u64>> {
        v.iter().map(|&x| Some(x)).collect()
    }

    #[test]
    fn cumulative_differencing() {
        assert_eq!(cumulative_to_daily(&opt(&[0, 1, 3, 3])), (opt(&[0, 1, 2, 0]), 0));
        assert_eq!(cumulative_to_daily(&opt(&[5, 4])), (opt(&[5, 0]), 1));
        let (daily, _) = cumulative_to_daily(&[Some(2), None, Some(5), Some(6)]);
        assert_eq!(daily, vec![Some(2), None, None, Some(1)]);
    }

    #[test]
    fn wide_csv_parses_and_clamps() {
        let csv = "region,lat,2020-03-01,2020-03-02,2020-03-03,2020-03-04\n\
                   A,1.0,0,1,3,3\n\
                   B,2.0,5,4,4,6\n";
        let loaded = read_wide_csv(csv.as_bytes(), &WideCsvSchema::default(), FeedKind::Deaths).unwrap();
        assert_eq!(loaded.clamped, 1);
        assert_eq!(loaded.records[0].series.values, opt(&[0, 1, 2, 0]));
        assert_eq!(loaded.records[1].series.values, opt(&[5, 0, 0, 2]));
        assert_eq!(loaded.records[0].series.start, d(3, 1));
    }

    #[test]
    fn wide_csv_errors() {
        let schema = WideCsvSchema::default();
        let bad = [
            "region,2020-03-01,2020-03-0x\nA,1,2\n",
            "region,2020-03-01,2020-03-03\nA,1,2\n",
            "region,2020-03-01\nA,x\n",
            "region,2020-03-01\nA,1\nA,2\n",
            "region,2020-03-01\nA,-1\n",
        ];
        for src in bad {
            let err = read_wide_csv(src.as_bytes(), &schema, FeedKind::Deaths).unwrap_err();
            assert_eq!(err.exit_code(), 3, "{src:?}: {err}");
        }
    }

    #[test]
    fn us_style_dates() {
        let schema = WideCsvSchema {
            region_column: "Province_State".into(),
            date_format: "%m/%d/%y".into(),
        };
        let csv = "UID,Province_State,3/31/20,4/1/20\n1,Utah,2,4\n";
        let loaded = read_wide_csv(csv.as_bytes(), &schema, FeedKind::Deaths).unwrap();
        assert_eq!(loaded.records[0].series.start, d(3, 31));
        assert_eq!(loaded.records[0].series.values, opt(&[2, 2]));
    }

    #[test]
    fn long_csv_fills_gaps_with_missing() {
        let csv = "region,date,count\nA,2020-03-03,4\nA,2020-03-01,1\nB,2020-03-02,0\n";
        let recs = read_long_csv(csv.as_bytes(), FeedKind::Tests).unwrap();
        assert_eq!(recs[0].series.values, vec![Some(1), None, Some(4)]);
        assert_eq!(recs[1].series.start, d(3, 2));
        let dup = "region,date,count\nA,2020-03-01,1\nA,2020-03-01,2\n";
        assert!(read_long_csv(dup.as_bytes(), FeedKind::Tests).is_err());
    }

    #[test]
    fn tweet_json_cases() {
        assert!(read_tweet_counts_json("{}".as_bytes(), None).unwrap().is_empty());
        let one = read_tweet_counts_json(r#"{"X": {"2020-04-13": 7}}"#.as_bytes(), None).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].series.values, vec![Some(7)]);
        assert_eq!(one[0].kind, FeedKind::Twitter);

        let dup = r#"{"X": {"2020-04-13": 7, "2020-04-13": 8}}"#;
        assert!(read_tweet_counts_json(dup.as_bytes(), None).is_err());
        let neg = r#"{"X": {"2020-04-13": -1}}"#;
        assert!(read_tweet_counts_json(neg.as_bytes(), None).is_err());
        let known: BTreeSet<String> = ["Y".to_string()].into();
        assert!(read_tweet_counts_json(r#"{"X": {}}"#.as_bytes(), Some(&known)).is_err());
        let half = read_tweet_counts_json(r#"{"X": {"2020-04-13": 2.5}}"#.as_bytes(), None).unwrap();
        assert_eq!(half[0].series.values, vec![Some(3)]);
    }

    #[test]
    fn tweet_json_round_trip() {
        let mut counts = BTreeMap::new();
        counts.insert("R".to_string(), BTreeMap::from([(d(4, 13), 3u64), (d(4, 15), 1)]));
        let mut buf = Vec::new();
        write_tweet_counts_json(&counts, &mut buf).unwrap();
        let recs = read_tweet_counts_json(buf.as_slice(), None).unwrap();
        assert_eq!(recs[0].series.values, vec![Some(3), None, Some(1)]);
    }

    fn bundle_with(kind: FeedKind, start: NaiveDate, values: Vec<Option<u64>>) -> RegionBundle {
        let mut b = RegionBundle::new("R", 1e6, default_epoch());
        b.insert(FeedRecord::new(kind, "R", CountSeries::new(start, values))).unwrap();
        b
    }

    #[test]
    fn align_marks_leading_days_missing() {
        let mut b = bundle_with(FeedKind::Deaths, default_epoch(), opt(&[0; 100]));
        b.insert(FeedRecord::new(FeedKind::Twitter, "R", CountSeries::new(d(4, 13), opt(&[5; 30]))))
            .unwrap();
        let a = align(&b, d(5, 1)).unwrap();
        let tw = &a.feeds[&FeedKind::Twitter].series;
        assert_eq!(tw.start, default_epoch());
        assert_eq!(leading_missing(tw), 56);
        assert_eq!(tw.values[56], Some(5));
        assert_eq!(tw.len(), 75);
        assert_eq!(align(&a, d(5, 1)).unwrap(), a);
    }

    #[test]
    fn align_respects_declared_start_and_errors() {
        let b = bundle_with(FeedKind::Deaths, d(3, 1), opt(&[1; 60]));
        let floored = RegionBundle {
            feeds: b
                .feeds
                .values()
                .map(|r| (r.kind, r.clone().with_profile_floor(RegionProfile::World)))
                .collect(),
            ..b.clone()
        };
        let a = align(&floored, d(4, 29)).unwrap();
        assert_eq!(leading_missing(&a.feeds[&FeedKind::Deaths].series), 36);
        assert!(a.validate().is_ok());
        assert_eq!(align(&b, d(2, 1)).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn bundle_requires_deaths() {
        let b = bundle_with(FeedKind::Tests, default_epoch(), opt(&[1]));
        assert!(b.validate().is_err());
        assert!(b.fit_data(&[], DelayPmf::default()).is_err());
    }

    #[test]
    fn feed_list_parsing() {
        assert_eq!(
            parse_feed_list("deaths, twitter,deaths").unwrap(),
            vec![FeedKind::Deaths, FeedKind::Twitter]
        );
        assert!(parse_feed_list("deaths,fax").is_err());
        assert_eq!(FeedKind::Twitter.earliest_start(RegionProfile::NhsRegion), d(4, 9));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn daily_cumsum_round_trip(daily in prop::collection::vec(0u64..1000, 1..60)) {
            let cum: Vec<Option<u64>> = daily
                .iter()
                .scan(0u64, |acc, &x| { *acc += x; Some(Some(*acc)) })
                .collect();
            let (back, clamped) = cumulative_to_daily(&cum);
            prop_assert_eq!(clamped, 0);
            prop_assert_eq!(back, daily.iter().map(|&x| Some(x)).collect::<Vec<_>>());
        }

        #[test]
        fn align_never_fabricates_and_is_idempotent(
            offset in -30i64..60,
            values in prop::collection::vec(prop::option::of(0u64..50), 0..80),
            end in 0i64..120,
        ) {
            let epoch = default_epoch();
            let mut b = RegionBundle::new("R", 1e5, epoch);
            let series = CountSeries::new(epoch + Duration::days(offset), values);
            b.insert(FeedRecord::new(FeedKind::Deaths, "R", series.clone())).unwrap();
            let a = align(&b, epoch + Duration::days(end)).unwrap();
            let s = &a.feeds[&FeedKind::Deaths].series;
            prop_assert!(s.observed_total() <= series.observed_total());
            prop_assert_eq!(s.len() as i64, end + 1);
            prop_assert_eq!(align(&a, epoch + Duration::days(end)).unwrap(), a);
        }
    }
}
