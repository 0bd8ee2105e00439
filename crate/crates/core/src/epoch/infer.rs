use std::collections::BTreeMap;

use log::warn;

use super::{
    locate, EpochInferenceParams, EpochTimeline, IntervalOrigin, ObservationBitset,
    ObservationWindow, OwnershipInterval, RdapPolarity, RdapRecord, SOURCE_SCAN, SOURCE_ZONE,
};
use crate::day::DayDate;
use crate::error::{Error, Result};

/// Phase 1: union zone and scan sightings into one daily bitset.
///
/// Inputs may be unsorted and contain duplicates.
pub fn build_observation_bitset(
    domain: &str,
    zone: &[DayDate],
    scan: &[DayDate],
) -> Result<ObservationBitset> {
    let all = zone.iter().chain(scan);
    let (Some(first), Some(last)) = (all.clone().min(), all.max()) else {
        return Err(Error::EmptyObservations(domain.to_string()));
    };
    let mut flags = vec![0u8; (last.days_since(*first) + 1) as usize];
    for day in zone {
        flags[day.days_since(*first) as usize] |= SOURCE_ZONE;
    }
    for day in scan {
        flags[day.days_since(*first) as usize] |= SOURCE_SCAN;
    }
    Ok(ObservationBitset::new(domain.to_string(), *first, flags))
}

/// Phase 2: one open interval per maximal run of observed days.
pub fn extract_runs(bitset: &ObservationBitset, window: ObservationWindow) -> Vec<OwnershipInterval> {
    let flags = bitset.flags();
    let mut out = Vec::new();
    let mut i = 0;
    while i < flags.len() {
        if flags[i] == 0 {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < flags.len() && flags[i] != 0 {
            i += 1;
        }
        let start = bitset.first_day() + run_start as i32;
        let end = bitset.first_day() + (i as i32 - 1);
        let mut iv = OwnershipInterval::open(start, end);
        iv.right_censored = end >= window.last;
        out.push(iv);
    }
    out
}

fn synthesized(day: DayDate, window: ObservationWindow) -> OwnershipInterval {
    OwnershipInterval {
        right_censored: day >= window.last,
        origin: IntervalOrigin::RdapSynthesized,
        ..OwnershipInterval::open(day, day)
    }
}

/// Index of the interval containing `day`, inserting a single-day
/// synthesized interval when nothing covers it.
fn locate_or_insert(
    intervals: &mut Vec<OwnershipInterval>,
    day: DayDate,
    window: ObservationWindow,
) -> usize {
    if let Some(i) = locate(intervals, day) {
        return i;
    }
    let at = intervals.partition_point(|iv| iv.start < day);
    intervals.insert(at, synthesized(day, window));
    at
}

/// Phase 3a: authoritative registration dates close or split intervals and
/// mark the intervals they span for merging.
///
/// Records are deduplicated per registration date (keeping the latest query)
/// and applied in ascending registration order, so input order is irrelevant.
pub fn apply_rdap_positives(
    mut intervals: Vec<OwnershipInterval>,
    positives: &[RdapRecord],
    grace_days: i32,
    window: ObservationWindow,
) -> Result<Vec<OwnershipInterval>> {
    let mut latest: BTreeMap<DayDate, DayDate> = BTreeMap::new();
    for rec in positives {
        if rec.polarity != RdapPolarity::Positive {
            return Err(Error::WrongPolarity(rec.domain.clone()));
        }
        let Some(reg) = rec.registration_date else {
            return Err(Error::MissingRegistrationDate {
                domain: rec.domain.clone(),
                query_time: rec.query_time,
            });
        };
        if reg > rec.query_time {
            warn!(
                "{}: registration date {reg} is after query time {}; ignored",
                rec.domain, rec.query_time
            );
            continue;
        }
        let q = latest.entry(reg).or_insert(rec.query_time);
        *q = (*q).max(rec.query_time);
    }

    for (reg, query) in latest {
        let mut reg_idx = locate_or_insert(&mut intervals, reg, window);
        // query >= reg, so any insertion here lands after reg_idx
        let mut obs_idx = locate_or_insert(&mut intervals, query, window);

        let iv = &mut intervals[reg_idx];
        if reg.days_since(iv.start) <= grace_days {
            iv.start_closed = true;
        } else {
            let right = OwnershipInterval {
                start: reg,
                start_closed: true,
                ..iv.clone()
            };
            iv.end = reg.pred();
            iv.merge_next = false;
            iv.right_censored = false;
            intervals.insert(reg_idx + 1, right);
            if obs_idx == reg_idx {
                obs_idx = reg_idx + 1;
            } else {
                obs_idx += 1;
            }
            reg_idx += 1;
        }
        for iv in &mut intervals[reg_idx..obs_idx] {
            iv.merge_next = true;
        }
    }
    Ok(intervals)
}

/// Phase 3b: a negative response far from every interval blocks merging
/// into the next interval by closing its start.
///
/// A negative that falls inside an observed interval contradicts the
/// delegation data; it is reported and the delegation evidence wins.
pub fn apply_rdap_negatives(
    mut intervals: Vec<OwnershipInterval>,
    negatives: &[RdapRecord],
    grace_days: i32,
) -> Vec<OwnershipInterval> {
    let mut days: Vec<DayDate> = negatives
        .iter()
        .filter(|r| r.polarity == RdapPolarity::Negative)
        .map(|r| r.query_time)
        .collect();
    days.sort_unstable();
    days.dedup();

    for q in days {
        let next = intervals.partition_point(|iv| iv.start <= q);
        if next > 0 && intervals[next - 1].contains(q) {
            warn!(
                "negative RDAP on {q} conflicts with observed interval {}..{}; keeping delegation evidence",
                intervals[next - 1].start,
                intervals[next - 1].end
            );
            continue;
        }
        let near_prev = next > 0 && intervals[next - 1].distance_to(q) <= grace_days;
        let near_next = next < intervals.len() && intervals[next].distance_to(q) <= grace_days;
        if near_prev || near_next {
            continue;
        }
        if let Some(iv) = intervals.get_mut(next) {
            iv.start_closed = true;
        }
    }
    intervals
}

/// Phase 4: merge adjacent intervals unless the successor's start is closed;
/// short gaps and explicit merge hints both allow the merge.
///
/// A single left-to-right pass reaches the fixed point because the merged
/// interval takes its successor's end and merge hint.
pub fn merge_adjacent(
    intervals: Vec<OwnershipInterval>,
    params: &EpochInferenceParams,
) -> Vec<OwnershipInterval> {
    let mut out: Vec<OwnershipInterval> = Vec::with_capacity(intervals.len());
    for next in intervals {
        if let Some(cur) = out.last_mut() {
            let mergeable = !next.start_closed
                && (cur.gap_to(&next) < params.gap_threshold_days || cur.merge_next);
            if mergeable {
                cur.end = next.end;
                cur.right_censored = next.right_censored;
                cur.merge_next = next.merge_next;
                if next.origin == IntervalOrigin::Observed {
                    cur.origin = IntervalOrigin::Observed;
                }
                continue;
            }
        }
        out.push(next);
    }
    out
}

/// Marks which interval ends are backed by evidence.
///
/// Every interval but the last is followed by a distinct registration. The
/// last one has ended only if it stops at least `gap_threshold_days` before
/// the window closes, or a negative RDAP response lies more than the grace
/// window from both its end and the window's last day. A negative closer to
/// either could still be absorbed by an interval observed later.
pub fn confirm_ends(
    mut intervals: Vec<OwnershipInterval>,
    negatives: &[RdapRecord],
    params: &EpochInferenceParams,
    window: ObservationWindow,
) -> Vec<OwnershipInterval> {
    let n = intervals.len();
    let g = params.grace_window_days;
    let negative_days: Vec<DayDate> = negatives
        .iter()
        .filter(|r| r.polarity == RdapPolarity::Negative)
        .map(|r| r.query_time)
        .collect();
    for (i, iv) in intervals.iter_mut().enumerate() {
        iv.end_confirmed = if iv.right_censored {
            false
        } else if i + 1 < n {
            true
        } else {
            window.last.days_since(iv.end) >= params.gap_threshold_days
                || negative_days
                    .iter()
                    .any(|&q| q.days_since(iv.end) > g && window.last.days_since(q) > g)
        };
    }
    intervals
}

/// Runs all four phases for one domain.
///
/// Positive records lacking a registration date are dropped with a warning.
pub fn infer_epochs(
    domain: &str,
    zone: &[DayDate],
    scan: &[DayDate],
    rdap: &[RdapRecord],
    params: &EpochInferenceParams,
    window: ObservationWindow,
) -> Result<EpochTimeline> {
    params.validate()?;
    let bitset = build_observation_bitset(domain, zone, scan)?;
    let runs = extract_runs(&bitset, window);

    let (mut positives, mut negatives) = (Vec::new(), Vec::new());
    for rec in rdap {
        match rec.polarity {
            RdapPolarity::Positive if rec.usable_for_refinement() => positives.push(rec.clone()),
            RdapPolarity::Positive => {
                warn!(
                    "{domain}: positive RDAP on {} without usable registration date skipped",
                    rec.query_time
                );
            }
            RdapPolarity::Negative => negatives.push(rec.clone()),
        }
    }

    let refined = apply_rdap_positives(runs, &positives, params.grace_window_days, window)?;
    let refined = apply_rdap_negatives(refined, &negatives, params.grace_window_days);
    let merged = merge_adjacent(refined, params);
    let intervals = confirm_ends(merged, &negatives, params, window);

    Ok(EpochTimeline {
        domain: domain.to_string(),
        intervals,
        params: *params,
        window,
    })
}
