//! Calendar-anchored daily time series.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// A contiguous run of daily values starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateSeries<T = f64> {
    pub start: NaiveDate,
    pub values: Vec<T>,
}

/// Observed daily counts; `None` marks a missing day.
pub type CountSeries = DateSeries<Option<u64>>;

impl<T> DateSeries<T> {
    pub fn new(start: NaiveDate, values: Vec<T>) -> Self {
        Self { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Date of the entry at `index`.
    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }

    /// One past the last covered date.
    pub fn end(&self) -> NaiveDate {
        self.date_at(self.values.len())
    }

    /// Index of `date` relative to `start`; negative before the start.
    pub fn offset_of(&self, date: NaiveDate) -> i64 {
        (date - self.start).num_days()
    }

    pub fn get(&self, date: NaiveDate) -> Option<&T> {
        let idx = self.offset_of(date);
        if idx < 0 {
            return None;
        }
        self.values.get(idx as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, &T)> {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.date_at(i), v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> DateSeries<U> {
        DateSeries {
            start: self.start,
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl DateSeries<f64> {
    pub fn zeros(start: NaiveDate, len: usize) -> Self {
        Self::new(start, vec![0.0; len])
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl CountSeries {
    pub fn observed_total(&self) -> u64 {
        self.values.iter().flatten().sum()
    }

    pub fn observed_days(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Checks that two series share the same calendar anchor.
pub fn check_aligned<A, B>(a: &DateSeries<A>, b: &DateSeries<B>, what: &str) -> Result<()> {
    ensure!(
        a.start == b.start,
        Data,
        "{what}: series starts {} but model starts {}",
        a.start,
        b.start
    );
    Ok(())
}

pub(crate) fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| crate::error::Error::Data(format!("malformed date {s:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn dates_and_offsets() {
        let s = DateSeries::new(d(2020, 2, 28), vec![1.0, 2.0, 3.0]);
        assert_eq!(s.date_at(2), d(2020, 3, 1));
        assert_eq!(s.end(), d(2020, 3, 2));
        assert_eq!(s.get(d(2020, 2, 29)), Some(&2.0));
        assert_eq!(s.get(d(2020, 2, 27)), None);
        assert_eq!(s.get(d(2020, 3, 2)), None);
    }

    #[test]
    fn observed_totals_skip_missing() {
        let s: CountSeries = DateSeries::new(d(2020, 1, 1), vec![None, Some(3), Some(4), None]);
        assert_eq!(s.observed_total(), 7);
        assert_eq!(s.observed_days(), 2);
    }
}
