//! Registration epoch inference.
//!
//! A domain's zone delegation and active-scan sightings are unioned into a
//! daily bitset, runs of observed days become candidate intervals, RDAP
//! responses close or split those intervals, and finally adjacent intervals
//! separated by short gaps are merged back together.

mod infer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::day::DayDate;
use crate::error::{Error, Result};

pub use infer::{
    apply_rdap_negatives, apply_rdap_positives, build_observation_bitset, confirm_ends,
    extract_runs, infer_epochs, merge_adjacent,
};

/// Per-day provenance bits stored in an [`ObservationBitset`].
pub const SOURCE_ZONE: u8 = 0b01;
pub const SOURCE_SCAN: u8 = 0b10;

/// Unified daily presence for one domain, from its first to its last
/// observed day.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationBitset {
    domain: String,
    first_day: DayDate,
    flags: Vec<u8>,
}

impl ObservationBitset {
    pub(crate) fn new(domain: String, first_day: DayDate, flags: Vec<u8>) -> Self {
        debug_assert!(!flags.is_empty());
        ObservationBitset {
            domain,
            first_day,
            flags,
        }
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn first_day(&self) -> DayDate {
        self.first_day
    }

    pub fn last_day(&self) -> DayDate {
        self.first_day + (self.flags.len() as i32 - 1)
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn is_set(&self, day: DayDate) -> bool {
        self.sources(day) != 0
    }

    /// Provenance flags for `day`, zero when unobserved or out of range.
    pub fn sources(&self, day: DayDate) -> u8 {
        let off = day.days_since(self.first_day);
        if off < 0 {
            return 0;
        }
        self.flags.get(off as usize).copied().unwrap_or(0)
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.flags.iter().map(|f| *f != 0)
    }

    pub(crate) fn flags(&self) -> &[u8] {
        &self.flags
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RdapPolarity {
    Positive,
    Negative,
}

/// One RDAP lookup result. A positive response carries the start date of the
/// registration active at `query_time`; a negative one says nothing is
/// registered.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RdapRecord {
    pub domain: String,
    pub query_time: DayDate,
    #[serde(rename = "status")]
    pub polarity: RdapPolarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration_date: Option<DayDate>,
}

impl RdapRecord {
    pub fn positive(domain: impl Into<String>, query_time: DayDate, registered: DayDate) -> Self {
        RdapRecord {
            domain: domain.into(),
            query_time,
            polarity: RdapPolarity::Positive,
            registration_date: Some(registered),
        }
    }

    pub fn negative(domain: impl Into<String>, query_time: DayDate) -> Self {
        RdapRecord {
            domain: domain.into(),
            query_time,
            polarity: RdapPolarity::Negative,
            registration_date: None,
        }
    }

    /// Positive records that omit the registration date cannot refine
    /// intervals; some registries never publish it.
    pub fn usable_for_refinement(&self) -> bool {
        match self.polarity {
            RdapPolarity::Positive => self
                .registration_date
                .is_some_and(|reg| reg <= self.query_time),
            RdapPolarity::Negative => self.registration_date.is_none(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalOrigin {
    Observed,
    RdapSynthesized,
}

/// An inferred registration interval, inclusive on both ends.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OwnershipInterval {
    pub start: DayDate,
    pub end: DayDate,
    /// The start is backed by an authoritative registration date.
    pub start_closed: bool,
    /// The interval reaches the last day of the observation window.
    pub right_censored: bool,
    /// RDAP evidence ties this interval to its successor.
    pub merge_next: bool,
    /// There is positive evidence the registration ended at `end`: a later
    /// distinct interval, at least a gap threshold of trailing absence, or a
    /// negative RDAP response more than the grace window after `end`.
    #[serde(default)]
    pub end_confirmed: bool,
    pub origin: IntervalOrigin,
}

impl OwnershipInterval {
    pub fn open(start: DayDate, end: DayDate) -> Self {
        OwnershipInterval {
            start,
            end,
            start_closed: false,
            right_censored: false,
            merge_next: false,
            end_confirmed: false,
            origin: IntervalOrigin::Observed,
        }
    }

    pub fn contains(&self, day: DayDate) -> bool {
        self.start <= day && day <= self.end
    }

    /// Number of days covered, counting both ends.
    pub fn len_days(&self) -> i32 {
        self.end.days_since(self.start) + 1
    }

    /// Unobserved days strictly between `self` and a later interval.
    pub fn gap_to(&self, next: &OwnershipInterval) -> i32 {
        next.start.days_since(self.end) - 1
    }

    /// Distance in days from `day` to the nearest covered day.
    pub fn distance_to(&self, day: DayDate) -> i32 {
        if day < self.start {
            self.start.days_since(day)
        } else if day > self.end {
            day.days_since(self.end)
        } else {
            0
        }
    }

    /// The registration is known to have ended on or before `as_of - 1`.
    pub fn ended_before(&self, as_of: DayDate) -> bool {
        self.end_confirmed && !self.right_censored && self.end < as_of
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EpochInferenceParams {
    pub gap_threshold_days: i32,
    pub grace_window_days: i32,
}

impl Default for EpochInferenceParams {
    fn default() -> Self {
        EpochInferenceParams {
            gap_threshold_days: 80,
            grace_window_days: 2,
        }
    }
}

impl EpochInferenceParams {
    pub fn new(gap_threshold_days: i32, grace_window_days: i32) -> Result<Self> {
        let p = EpochInferenceParams {
            gap_threshold_days,
            grace_window_days,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gap_threshold_days < 1 {
            return Err(Error::InvalidParams(format!(
                "gap threshold must be at least 1 day, got {}",
                self.gap_threshold_days
            )));
        }
        if self.grace_window_days < 0 {
            return Err(Error::InvalidParams(format!(
                "grace window must be non-negative, got {}",
                self.grace_window_days
            )));
        }
        Ok(())
    }
}

/// Global parameters with optional per-TLD (or per-suffix) overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamsByTld {
    pub default: EpochInferenceParams,
    #[serde(default)]
    pub overrides: BTreeMap<String, EpochInferenceParams>,
}

impl ParamsByTld {
    pub fn uniform(default: EpochInferenceParams) -> Self {
        ParamsByTld {
            default,
            overrides: BTreeMap::new(),
        }
    }

    /// Parameters for `domain`; the longest matching suffix override wins.
    pub fn for_domain(&self, domain: &str) -> EpochInferenceParams {
        self.overrides
            .iter()
            .filter(|(suffix, _)| {
                domain == suffix.as_str()
                    || domain
                        .strip_suffix(suffix.as_str())
                        .is_some_and(|head| head.ends_with('.'))
            })
            .max_by_key(|(suffix, _)| suffix.len())
            .map(|(_, p)| *p)
            .unwrap_or(self.default)
    }

    pub fn validate(&self) -> Result<()> {
        self.default.validate()?;
        self.overrides.values().try_for_each(|p| p.validate())
    }
}

/// First and last day for which observation data exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub first: DayDate,
    pub last: DayDate,
}

impl ObservationWindow {
    pub fn new(first: DayDate, last: DayDate) -> Result<Self> {
        if first > last {
            return Err(Error::InvalidParams(format!(
                "window start {first} is after window end {last}"
            )));
        }
        Ok(ObservationWindow { first, last })
    }

    pub fn contains(&self, day: DayDate) -> bool {
        self.first <= day && day <= self.last
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochTimeline {
    pub domain: String,
    pub intervals: Vec<OwnershipInterval>,
    pub params: EpochInferenceParams,
    pub window: ObservationWindow,
}

impl EpochTimeline {
    /// Index of the interval covering `day`.
    pub fn position_of(&self, day: DayDate) -> Option<usize> {
        locate(&self.intervals, day)
    }

    pub fn interval_containing(&self, day: DayDate) -> Option<&OwnershipInterval> {
        self.position_of(day).map(|i| &self.intervals[i])
    }

    /// Checks ordering, disjointness and the right-censoring rule.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for iv in &self.intervals {
            if iv.start > iv.end {
                return Err(format!("interval {}..{} is reversed", iv.start, iv.end));
            }
            if iv.right_censored && iv.end < self.window.last {
                return Err(format!(
                    "interval {}..{} is right-censored before window end {}",
                    iv.start, iv.end, self.window.last
                ));
            }
        }
        for pair in self.intervals.windows(2) {
            if pair[0].end >= pair[1].start {
                return Err(format!(
                    "intervals {}..{} and {}..{} overlap or are unsorted",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                ));
            }
        }
        Ok(())
    }
}

/// Binary search for the interval containing `day` in a sorted, disjoint list.
pub(crate) fn locate(intervals: &[OwnershipInterval], day: DayDate) -> Option<usize> {
    let idx = intervals.partition_point(|iv| iv.start <= day);
    if idx == 0 {
        return None;
    }
    intervals[idx - 1].contains(day).then_some(idx - 1)
}
