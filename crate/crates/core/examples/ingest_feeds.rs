//! Loads cumulative deaths and tweet counts and aligns them on one calendar.
//!
//! Run from the crate directory so the fixture paths resolve.

use std::path::Path;

use chrono::NaiveDate;
use epifuse::ingest::*;

fn main() -> epifuse::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let schema = WideCsvSchema { region_column: "Province_State".into(), date_format: "%m/%d/%y".into() };
    let deaths = load_wide_csv(&fixtures.join("deaths_wide.csv"), &schema, FeedKind::Deaths)?;
    println!("{} regions, {} clamped revisions", deaths.records.len(), deaths.clamped);
    let tweets = load_tweet_counts_json(&fixtures.join("tweet_counts.json"), None)?;

    for d in deaths.records {
        let mut bundle = RegionBundle::new(d.region.clone(), 1e6, default_epoch());
        bundle.insert(d)?;
        if let Some(t) = tweets.iter().find(|t| t.region == bundle.region) {
            bundle.insert(t.clone().with_profile_floor(RegionProfile::UsState))?;
        }
        let aligned = align(&bundle, NaiveDate::from_ymd_opt(2020, 4, 20).unwrap())?;
        for (kind, rec) in &aligned.feeds {
            println!(
                "{:<6} {:<8} {} days, {} observed, {} leading missing",
                aligned.region,
                kind,
                rec.series.len(),
                rec.series.observed_days(),
                leading_missing(&rec.series)
            );
        }
    }
    Ok(())
}
