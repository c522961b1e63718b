use chrono::NaiveDate;
use epifuse::ingest::*;

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn us_schema() -> WideCsvSchema {
    WideCsvSchema { region_column: "Province_State".into(), date_format: "%m/%d/%y".into() }
}

#[test]
fn wide_fixture_differences_and_clamps() {
    let loaded = load_wide_csv(&fixture("deaths_wide.csv"), &us_schema(), FeedKind::Deaths).unwrap();
    assert_eq!(loaded.clamped, 2);
    let regions: Vec<&str> = loaded.records.iter().map(|r| r.region.as_str()).collect();
    assert_eq!(regions, ["Alpha", "Beta", "Gamma"]);
    for r in &loaded.records {
        assert_eq!(r.series.start, date(2020, 2, 17));
        assert_eq!(r.kind, FeedKind::Deaths);
    }
    // 5 4 7 6 7: both drops clamp to zero, the following rise is taken from the revised value.
    assert_eq!(loaded.records[1].series.values, [Some(5), Some(0), Some(3), Some(0), Some(1)]);
}

#[test]
fn wrong_schema_is_a_data_error() {
    let err = load_wide_csv(&fixture("deaths_wide.csv"), &WideCsvSchema::default(), FeedKind::Deaths).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn long_fixture_fills_gaps_with_missing() {
    let recs = load_long_csv(&fixture("tests_long.csv"), FeedKind::Tests).unwrap();
    let alpha = recs.iter().find(|r| r.region == "Alpha").unwrap();
    assert_eq!(alpha.series.start, date(2020, 3, 1));
    assert_eq!(alpha.series.values, [Some(10), Some(12), None, Some(9)]);
    let beta = recs.iter().find(|r| r.region == "Beta").unwrap();
    assert_eq!(beta.series.values, [Some(4)]);
}

#[test]
fn tweet_fixture_rounds_and_aligns() {
    let recs = load_tweet_counts_json(&fixture("tweet_counts.json"), None).unwrap();
    let alpha = recs.iter().find(|r| r.region == "Alpha").unwrap().clone();
    assert_eq!(alpha.series.values, [Some(3), Some(5), None, Some(3)]);

    let deaths = load_wide_csv(&fixture("deaths_wide.csv"), &us_schema(), FeedKind::Deaths)
        .unwrap()
        .records
        .remove(0);
    let mut bundle = RegionBundle::new("Alpha", 1e6, default_epoch());
    bundle.insert(deaths).unwrap();
    bundle.insert(alpha).unwrap();
    let aligned = align(&bundle, date(2020, 4, 20)).unwrap();
    let tw = &aligned.feeds[&FeedKind::Twitter].series;
    assert_eq!(tw.start, default_epoch());
    assert_eq!(leading_missing(tw), 56);
    assert_eq!(tw.values.len(), 64);
    assert_eq!(&tw.values[56..], [Some(3), Some(5), None, Some(3), None, None, None, None]);

    let known = ["Alpha".to_string()].into();
    assert!(load_tweet_counts_json(&fixture("tweet_counts.json"), Some(&known)).is_err());
}
