//! Aggregate statistics over verdicts: zombie-fraction series, lifespan
//! survival curves, zombie durations and registration-to-linkage gaps.

mod km;
mod mwu;

pub use km::{kaplan_meier, KmCurve, KmPoint, SurvivalObs};
pub use mwu::{
    mann_whitney_u, mann_whitney_u_with, MwuMethod, MwuResult, EXACT_MAX_SMALLER_GROUP,
    EXACT_MAX_TOTAL,
};

use std::collections::{BTreeMap, HashMap, HashSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::classify::{batch_classify, zombie_duration, VerdictStatus, ZombieVerdict};
use crate::day::DayDate;
use crate::epoch::EpochTimeline;
use crate::error::{Error, Result};
use crate::linkage::{DeathCause, Ecosystem, Linkage};

/// Empirical distribution over a sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    values: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.retain(|v| !v.is_nan());
        values.sort_by(f64::total_cmp);
        Ecdf { values }
    }

    pub fn from_days(days: impl IntoIterator<Item = i32>) -> Self {
        Self::new(days.into_iter().map(f64::from).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Share of the sample at or below `x`.
    pub fn fraction_le(&self, x: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.partition_point(|v| *v <= x) as f64 / self.values.len() as f64
    }

    pub fn median(&self) -> Option<f64> {
        median(&self.values)
    }

    /// `(value, cumulative fraction)` at every distinct value.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.values.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, v) in self.values.iter().enumerate() {
            let frac = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == *v => last.1 = frac,
                _ => out.push((*v, frac)),
            }
        }
        out
    }
}

/// Median of an already sorted slice; the mean of the middle pair for even
/// lengths.
pub fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}

fn median_of_days(days: &[i32]) -> Option<f64> {
    let mut v: Vec<f64> = days.iter().map(|&d| f64::from(d)).collect();
    v.sort_by(f64::total_cmp);
    median(&v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub date: DayDate,
    pub active: u64,
    pub zombies: u64,
    pub fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub by_ecosystem: BTreeMap<Ecosystem, Vec<SeriesRow>>,
}

/// Daily active and active-zombie counts per ecosystem over `from..=to`.
///
/// A linkage is active on `d` when `birth <= d < death`, and a zombie on `d`
/// once its zombie onset has passed. Onsets come from the verdicts, which
/// should have been computed with `as_of >= to`.
pub fn zombie_fraction_series(verdicts: &[ZombieVerdict], from: DayDate, to: DayDate) -> TimeSeries {
    let mut out = TimeSeries::default();
    if to < from {
        return out;
    }
    let days = (to.days_since(from) + 1) as usize;
    let mut deltas: BTreeMap<Ecosystem, (Vec<i64>, Vec<i64>)> = BTreeMap::new();
    // Adds +1 on [start, end) clipped to the range.
    let add = |buf: &mut Vec<i64>, start: DayDate, end: Option<DayDate>| {
        let s = start.max(from);
        let e = end.map_or(to.succ(), |e| e.min(to.succ()));
        if s < e {
            buf[s.days_since(from) as usize] += 1;
            buf[e.days_since(from) as usize] -= 1;
        }
    };
    for v in verdicts {
        let (active, zombies) = deltas
            .entry(v.linkage.ecosystem)
            .or_insert_with(|| (vec![0; days + 1], vec![0; days + 1]));
        add(active, v.linkage.birth, v.linkage.death);
        if let Some(onset) = v.zombie_from() {
            add(zombies, onset.max(v.linkage.birth), v.linkage.death);
        }
    }
    for (eco, (active, zombies)) in deltas {
        let mut rows = Vec::with_capacity(days);
        let (mut a, mut z) = (0i64, 0i64);
        for (i, date) in from.through(to).enumerate() {
            a += active[i];
            z += zombies[i];
            rows.push(SeriesRow {
                date,
                active: a as u64,
                zombies: z as u64,
                fraction: if a == 0 { 0.0 } else { z as f64 / a as f64 },
            });
        }
        out.by_ecosystem.insert(eco, rows);
    }
    out
}

/// Classifies with `as_of = to` and builds the series.
pub fn zombie_fraction_series_from(
    linkages: &[Linkage],
    timelines: &HashMap<String, EpochTimeline>,
    from: DayDate,
    to: DayDate,
) -> TimeSeries {
    let batch = batch_classify(linkages, timelines, to);
    zombie_fraction_series(&batch.verdicts, from, to)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub width_years: u32,
    /// First year of the first cohort; defaults to the earliest linkage year.
    #[serde(default)]
    pub origin_year: Option<i32>,
}

impl CohortSpec {
    pub fn new(width_years: u32) -> Result<Self> {
        if width_years == 0 {
            return Err(Error::InvalidParams("cohort width must be at least 1 year".into()));
        }
        Ok(CohortSpec { width_years, origin_year: None })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub first_year: i32,
    pub last_year: i32,
    pub curve: KmCurve,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortLifespans {
    pub cohorts: Vec<Cohort>,
    pub overall: Option<KmCurve>,
}

/// Kaplan-Meier curves of birth-epoch lengths, grouped by the year the
/// linkage was created. Each epoch counts once, under its earliest linkage;
/// epochs without a confirmed end are censored.
pub fn cohort_lifespans(verdicts: &[ZombieVerdict], spec: CohortSpec) -> Result<CohortLifespans> {
    if spec.width_years == 0 {
        return Err(Error::InvalidParams("cohort width must be at least 1 year".into()));
    }
    let mut epochs: BTreeMap<(&str, DayDate), (DayDate, SurvivalObs)> = BTreeMap::new();
    for v in verdicts {
        let Some(epoch) = &v.birth_epoch else { continue };
        let obs = SurvivalObs {
            time: epoch.len_days(),
            event: epoch.end_confirmed && !epoch.right_censored,
        };
        let entry = epochs
            .entry((v.linkage.dns_name.as_str(), epoch.start))
            .or_insert((v.linkage.birth, obs));
        entry.0 = entry.0.min(v.linkage.birth);
    }
    if epochs.is_empty() {
        return Ok(CohortLifespans::default());
    }
    let origin = spec
        .origin_year
        .unwrap_or_else(|| epochs.values().map(|(b, _)| b.year()).min().expect("non-empty"));
    let width = spec.width_years as i32;
    let mut groups: BTreeMap<i32, Vec<SurvivalObs>> = BTreeMap::new();
    let mut all = Vec::with_capacity(epochs.len());
    for (birth, obs) in epochs.into_values() {
        let bucket = (birth.year() - origin).div_euclid(width);
        groups.entry(bucket).or_default().push(obs);
        all.push(obs);
    }
    let cohorts = groups
        .into_iter()
        .map(|(bucket, obs)| {
            Ok(Cohort {
                first_year: origin + bucket * width,
                last_year: origin + bucket * width + width - 1,
                curve: kaplan_meier(&obs)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CohortLifespans { cohorts, overall: Some(kaplan_meier(&all)?) })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DurationDistributions {
    /// Days from zombie birth through the certificate's nominal expiry.
    pub remaining_validity: Ecdf,
    /// Days from zombie birth through death, cut at `as_of`.
    pub observed: Ecdf,
    pub revoked_observed: Ecdf,
    /// Days of validity removed by revocation.
    pub revoked_reduction: Ecdf,
    /// Reduction as a share of the remaining validity.
    pub revoked_reduction_share: Ecdf,
}

impl DurationDistributions {
    pub fn zombies(&self) -> usize {
        self.observed.len()
    }

    pub fn revoked_fraction(&self) -> f64 {
        if self.observed.is_empty() {
            0.0
        } else {
            self.revoked_observed.len() as f64 / self.observed.len() as f64
        }
    }
}

/// Zombie-duration distributions over zombies with a known start. Nominal
/// expiry is taken from `not_after` metadata and falls back to death.
pub fn duration_distributions(verdicts: &[ZombieVerdict]) -> DurationDistributions {
    let mut remaining = Vec::new();
    let mut observed = Vec::new();
    let mut revoked = Vec::new();
    let mut reduction = Vec::new();
    let mut share = Vec::new();
    for v in verdicts {
        let Ok(dur) = zombie_duration(v, v.as_of) else { continue };
        let (Some(zb), Some(death)) = (v.zombie_birth, v.linkage.death) else { continue };
        let expiry = v.linkage.not_after().unwrap_or(death).max(death);
        let rem = expiry.days_since(zb) + 1;
        remaining.push(f64::from(rem));
        observed.push(f64::from(dur.days));
        if v.linkage.death_cause == Some(DeathCause::Revoked) {
            revoked.push(f64::from(dur.days));
            let full = death.days_since(zb) + 1;
            reduction.push(f64::from(rem - full));
            share.push(f64::from(rem - full) / f64::from(rem));
        }
    }
    DurationDistributions {
        remaining_validity: Ecdf::new(remaining),
        observed: Ecdf::new(observed),
        revoked_observed: Ecdf::new(revoked),
        revoked_reduction: Ecdf::new(reduction),
        revoked_reduction_share: Ecdf::new(share),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub zombie: Vec<i32>,
    pub non_zombie: Vec<i32>,
    pub zombie_median: Option<f64>,
    pub non_zombie_median: Option<f64>,
    pub mwu: Option<MwuResult>,
}

/// Days from the start of the birth epoch to linkage creation, split into
/// zombies and live linkages. Linkages whose birth epoch is unknown are left
/// out. Identical epochs shared by several linkages contribute one gap each.
pub fn registration_to_linkage_gaps(verdicts: &[ZombieVerdict], method: MwuMethod) -> GapReport {
    let mut report = GapReport::default();
    let mut seen = HashSet::new();
    for v in verdicts {
        let Some(epoch) = &v.birth_epoch else { continue };
        if !seen.insert((&v.linkage.dns_name, &v.linkage.linked_name, v.linkage.birth)) {
            continue;
        }
        let gap = v.linkage.birth.days_since(epoch.start);
        match v.status {
            VerdictStatus::Zombie => report.zombie.push(gap),
            VerdictStatus::Live => report.non_zombie.push(gap),
            VerdictStatus::Indeterminate | VerdictStatus::Exempt => {}
        }
    }
    report.zombie.sort_unstable();
    report.non_zombie.sort_unstable();
    report.zombie_median = median_of_days(&report.zombie);
    report.non_zombie_median = median_of_days(&report.non_zombie);
    match (report.zombie.is_empty(), report.non_zombie.is_empty()) {
        (true, true) => {}
        (false, false) => {
            let a: Vec<f64> = report.zombie.iter().map(|&d| f64::from(d)).collect();
            let b: Vec<f64> = report.non_zombie.iter().map(|&d| f64::from(d)).collect();
            report.mwu = mann_whitney_u_with(&a, &b, method).ok();
        }
        _ => warn!(
            "registration gaps: {} zombie and {} non-zombie linkages; test skipped",
            report.zombie.len(),
            report.non_zombie.len()
        ),
    }
    report
}
