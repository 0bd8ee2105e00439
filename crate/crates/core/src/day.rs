//! Calendar days in UTC.
//!
//! Everything downstream of ingestion works at day granularity: two events
//! on the same UTC day are indistinguishable.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

const UNIX_EPOCH_CE_DAYS: i32 = 719_163;

/// A UTC calendar day, stored as the number of days since 1970-01-01.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DayDate(i32);

impl DayDate {
    pub const fn from_index(days_since_epoch: i32) -> Self {
        DayDate(days_since_epoch)
    }

    pub const fn index(self) -> i32 {
        self.0
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(Self::from)
    }

    pub fn to_naive(self) -> NaiveDate {
        NaiveDate::from_num_days_from_ce_opt(self.0 + UNIX_EPOCH_CE_DAYS)
            .expect("day index within chrono range")
    }

    pub fn year(self) -> i32 {
        self.to_naive().year()
    }

    /// Signed number of days from `earlier` to `self`.
    pub fn days_since(self, earlier: DayDate) -> i32 {
        self.0 - earlier.0
    }

    pub fn succ(self) -> Self {
        DayDate(self.0 + 1)
    }

    pub fn pred(self) -> Self {
        DayDate(self.0 - 1)
    }

    /// Inclusive iterator over `self..=last`.
    pub fn through(self, last: DayDate) -> impl Iterator<Item = DayDate> {
        (self.0..=last.0).map(DayDate)
    }
}

impl From<NaiveDate> for DayDate {
    fn from(d: NaiveDate) -> Self {
        DayDate(d.num_days_from_ce() - UNIX_EPOCH_CE_DAYS)
    }
}

impl Add<i32> for DayDate {
    type Output = DayDate;
    fn add(self, rhs: i32) -> DayDate {
        DayDate(self.0 + rhs)
    }
}

impl Sub<i32> for DayDate {
    type Output = DayDate;
    fn sub(self, rhs: i32) -> DayDate {
        DayDate(self.0 - rhs)
    }
}

impl fmt::Display for DayDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_naive().format("%Y-%m-%d"))
    }
}

/// Fast path for zero-padded `YYYY-MM-DD`, the form observation files use.
fn parse_canonical(b: &[u8]) -> Option<DayDate> {
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    let num = |r: std::ops::Range<usize>| {
        b[r].iter().try_fold(0u32, |acc, &c| c.is_ascii_digit().then(|| acc * 10 + u32::from(c - b'0')))
    };
    DayDate::from_ymd(num(0..4)? as i32, num(5..7)?, num(8..10)?)
}

impl FromStr for DayDate {
    type Err = Error;

    /// Accepts `YYYY-MM-DD`, or an RFC 3339 timestamp which is truncated to
    /// its UTC day.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if let Some(d) = parse_canonical(s.as_bytes()) {
            return Ok(d);
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(d.into());
        }
        chrono::DateTime::parse_from_rfc3339(s)
            .map(|ts| ts.with_timezone(&chrono::Utc).date_naive().into())
            .map_err(|_| Error::InvalidDate(s.to_string()))
    }
}

impl Serialize for DayDate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DayDate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
