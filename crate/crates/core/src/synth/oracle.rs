//! Expected analysis results computed straight from a world's truth, with
//! no inference. Assumes observations were emitted without noise.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DomainTruth, GroundTruthWorld, TrueEpoch};
use crate::classify::{EcosystemSummary, ReRegistrationInfo, VerdictStatus};
use crate::day::DayDate;
use crate::epoch::EpochInferenceParams;
use crate::error::{Error, Result};
use crate::indicators::{
    Attack, MavenActivityBreakdown, RevocationComparison, DEFAULT_AGP_DAYS,
};
use crate::linkage::{DeathCause, Ecosystem, DEFAULT_GASLESS_PREFIX};
use crate::stats::{SeriesRow, SurvivalObs, TimeSeries};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VerdictKey {
    pub ecosystem: Ecosystem,
    pub dns_name: String,
    pub linked_name: String,
    pub birth: DayDate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedInterval {
    pub start: DayDate,
    pub end: DayDate,
    pub right_censored: bool,
    pub end_confirmed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedVerdict {
    pub status: VerdictStatus,
    pub zombie_birth: Option<DayDate>,
    pub rereg: Option<ReRegistrationInfo>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub timelines: BTreeMap<String, Vec<ExpectedInterval>>,
    pub verdicts: BTreeMap<VerdictKey, ExpectedVerdict>,
    pub summary: BTreeMap<Ecosystem, EcosystemSummary>,
    pub series: TimeSeries,
    /// Birth-epoch lifespans, one per (name, epoch) carrying linkages; sorted.
    pub lifespans: BTreeMap<Ecosystem, Vec<SurvivalObs>>,
    /// Registration-to-linkage gaps `(zombie, live)`, sorted.
    pub gaps: BTreeMap<Ecosystem, (Vec<i32>, Vec<i32>)>,
    /// `(zombies with known start, of which within the add grace period)`.
    pub agp: BTreeMap<Ecosystem, (usize, usize)>,
    pub served_after_death: BTreeMap<String, i32>,
    /// Overlapping Web PKI zombies and their days served after re-registration.
    pub served_after_rereg: BTreeMap<String, i32>,
    pub revocation: RevocationComparison,
    pub maven: MavenActivityBreakdown,
    /// `(supporting count, population)` per attack and ecosystem.
    pub evidence: BTreeMap<(Attack, Ecosystem), (usize, usize)>,
}

/// A linkage as the truth defines it.
struct TruthLinkage {
    key: VerdictKey,
    death: Option<DayDate>,
    cause: Option<DeathCause>,
    /// Served range for certificates.
    served: Option<(DayDate, DayDate)>,
    publishes: Vec<DayDate>,
}

fn truth_linkages(d: &DomainTruth) -> Vec<TruthLinkage> {
    let mut out = Vec::new();
    let key = |ecosystem, linked_name: &str, birth| VerdictKey {
        ecosystem,
        dns_name: d.domain.clone(),
        linked_name: linked_name.to_string(),
        birth,
    };
    for c in &d.certificates {
        let (death, cause) = match c.revoked {
            Some(r) if r < c.not_after => (r, DeathCause::Revoked),
            _ => (c.not_after, DeathCause::Expired),
        };
        out.push(TruthLinkage {
            key: key(Ecosystem::Webpki, &c.fingerprint, c.not_before),
            death: Some(death),
            cause: Some(cause),
            served: c.served,
            publishes: Vec::new(),
        });
    }
    let mut claims: Vec<_> = d.ens_claims.iter().collect();
    claims.sort_by_key(|c| c.block_time);
    for (i, c) in claims.iter().enumerate() {
        let next = claims.get(i + 1).map(|n| n.block_time);
        out.push(TruthLinkage {
            key: key(Ecosystem::EnsOnchain, &c.wallet, c.block_time),
            death: next,
            cause: next.map(|_| DeathCause::Overwritten),
            served: None,
            publishes: Vec::new(),
        });
    }
    let mut gasless: BTreeMap<&str, DayDate> = BTreeMap::new();
    for t in &d.txt_records {
        if let Some(payload) = t.txt_value.strip_prefix(DEFAULT_GASLESS_PREFIX).and_then(|r| r.strip_prefix(' ')) {
            let e = gasless.entry(payload).or_insert(t.observed);
            *e = (*e).min(t.observed);
        }
    }
    for (payload, birth) in gasless {
        out.push(TruthLinkage {
            key: key(Ecosystem::EnsGasless, payload, birth),
            death: None,
            cause: None,
            served: None,
            publishes: Vec::new(),
        });
    }
    if let Some(m) = &d.maven {
        let mut publishes: Vec<DayDate> = m.versions.iter().map(|(_, day)| *day).collect();
        publishes.sort_unstable();
        out.push(TruthLinkage {
            key: key(Ecosystem::Maven, &m.namespace, publishes[0]),
            death: None,
            cause: None,
            served: None,
            publishes,
        });
    }
    out
}

fn bump(map: &mut BTreeMap<(Attack, Ecosystem), (usize, usize)>, key: (Attack, Ecosystem), hit: bool) {
    let e = map.entry(key).or_default();
    e.0 += usize::from(hit);
    e.1 += 1;
}

fn alive_on(birth: DayDate, death: Option<DayDate>, day: DayDate) -> bool {
    birth <= day && death.is_none_or(|d| day < d)
}

fn served_days(range: Option<(DayDate, DayDate)>, from: DayDate, to: DayDate, window_last: DayDate) -> i32 {
    let Some((a, b)) = range else { return 0 };
    from.through(to.min(window_last))
        .filter(|day| *day >= a && *day <= b)
        .count() as i32
}


/// Whether the data can show that `epochs[i]` ended by `wl`: a later
/// registration follows it, or the trailing unregistered stretch is at least
/// the gap threshold, or long enough that its middle day (where the negative
/// lookup falls) is outside the grace window on both sides.
fn end_confirmable(epochs: &[TrueEpoch], i: usize, wl: DayDate) -> bool {
    let e = epochs[i];
    if e.end >= wl {
        return false;
    }
    if i + 1 < epochs.len() {
        return true;
    }
    let p = EpochInferenceParams::default();
    let trailing = wl.days_since(e.end);
    trailing >= p.gap_threshold_days || trailing >= 2 * p.grace_window_days + 2
}

/// Expected results for a world emitted with [`super::NoiseModel::clean`],
/// as of `as_of` (which must not lie past the window end).
pub fn oracle_evaluate(world: &GroundTruthWorld, as_of: DayDate) -> Result<OracleOutput> {
    let (wf, wl) = (world.params.window_start, world.params.window_end);
    if as_of > wl || as_of < wf {
        return Err(Error::InvalidParams(format!("as_of {as_of} lies outside the window {wf}..{wl}")));
    }
    let agp_days = DEFAULT_AGP_DAYS;
    let mut out = OracleOutput::default();
    let days = (as_of.days_since(wf) + 1) as usize;
    let mut active: BTreeMap<Ecosystem, Vec<u64>> = BTreeMap::new();
    let mut zombie_days: BTreeMap<Ecosystem, Vec<u64>> = BTreeMap::new();
    let mut lifespans: BTreeMap<Ecosystem, BTreeMap<(String, DayDate), SurvivalObs>> = BTreeMap::new();
    let mut gap_seen = BTreeSet::new();

    for d in &world.domains {
        out.timelines.insert(
            d.domain.clone(),
            d.epochs
                .iter()
                .enumerate()
                .map(|(i, e)| ExpectedInterval {
                    start: e.start,
                    end: e.end.min(wl),
                    right_censored: e.end >= wl,
                    end_confirmed: end_confirmable(&d.epochs, i, wl),
                })
                .collect(),
        );
        for l in truth_linkages(d) {
            let eco = l.key.ecosystem;
            let birth = l.key.birth;
            let epoch_idx = d.epoch_containing(birth).expect("linkages are born inside registrations");
            let epoch: TrueEpoch = d.epochs[epoch_idx];
            let confirmable = end_confirmable(&d.epochs, epoch_idx, wl);
            let next_start = d.epochs.get(epoch_idx + 1).map(|n| n.start).filter(|s| *s <= as_of);

            let exempt = eco == Ecosystem::EnsGasless;
            // Registration over before as_of, with the linkage still valid the
            // day after it ended.
            let zb = epoch.end.succ();
            let zombie = !exempt && confirmable && epoch.end < as_of && l.death.is_none_or(|death| zb < death);
            let status = if exempt {
                VerdictStatus::Exempt
            } else if zombie {
                VerdictStatus::Zombie
            } else {
                VerdictStatus::Live
            };
            let rereg = next_start.filter(|_| !exempt).map(|s| ReRegistrationInfo {
                next_epoch_start: s,
                overlaps_linkage_validity: l.death.is_none_or(|death| s <= death),
            });
            let alive_at_as_of = alive_on(birth, l.death, as_of);

            let s = out.summary.entry(eco).or_default();
            s.total += 1;
            s.active += usize::from(alive_at_as_of);
            match status {
                VerdictStatus::Exempt => s.exempt += 1,
                VerdictStatus::Zombie => {
                    s.zombies += 1;
                    s.active_zombies += usize::from(alive_at_as_of);
                }
                _ => s.live += 1,
            }

            let a = active.entry(eco).or_insert_with(|| vec![0; days]);
            let z = zombie_days.entry(eco).or_insert_with(|| vec![0; days]);
            for (i, day) in wf.through(as_of).enumerate() {
                if alive_on(birth, l.death, day) {
                    a[i] += 1;
                    if !exempt && confirmable && epoch.end < day {
                        z[i] += 1;
                    }
                }
            }

            if exempt {
                out.verdicts.insert(l.key, ExpectedVerdict { status, zombie_birth: None, rereg: None });
                continue;
            }

            let visible_len = epoch.end.min(wl).days_since(epoch.start) + 1;
            let obs = SurvivalObs { time: visible_len, event: confirmable };
            lifespans.entry(eco).or_default().insert((d.domain.clone(), epoch.start), obs);

            if gap_seen.insert((eco, l.key.dns_name.clone(), l.key.linked_name.clone(), birth)) {
                let gap = birth.days_since(epoch.start);
                let g = out.gaps.entry(eco).or_default();
                if zombie { g.0.push(gap) } else { g.1.push(gap) }
            }

            let ev = |attack| (attack, eco);
            if alive_at_as_of {
                bump(&mut out.evidence, ev(Attack::LinkedNameSquatting), zombie);
            }
            if zombie {
                let within = epoch.len_days() <= agp_days;
                let agp = out.agp.entry(eco).or_default();
                agp.0 += 1;
                agp.1 += usize::from(within);
                bump(&mut out.evidence, ev(Attack::BulkLinkedNameCreation), within);
                let overwritten =
                    l.cause == Some(DeathCause::Overwritten) && l.death.is_some_and(|death| death >= zb);
                bump(&mut out.evidence, ev(Attack::LinkedNameTakeover), overwritten);
                let overlap = rereg.as_ref().is_some_and(|r| r.overlaps_linkage_validity);
                bump(&mut out.evidence, ev(Attack::LinkedResourceTakeover), overlap);
            }

            match eco {
                Ecosystem::Webpki if zombie => {
                    let death = l.death.expect("certificates expire");
                    let end = death.min(as_of);
                    out.served_after_death
                        .insert(l.key.linked_name.clone(), served_days(l.served, zb, end, wl));
                    let revoked = l.cause == Some(DeathCause::Revoked);
                    let r = &mut out.revocation;
                    match rereg.as_ref().filter(|r| r.overlaps_linkage_validity) {
                        Some(rr) => {
                            r.rereg_total += 1;
                            r.rereg_revoked += usize::from(revoked);
                            out.served_after_rereg.insert(
                                l.key.linked_name.clone(),
                                served_days(l.served, rr.next_epoch_start, end, wl),
                            );
                        }
                        None => {
                            r.no_rereg_total += 1;
                            r.no_rereg_revoked += usize::from(revoked);
                        }
                    }
                }
                Ecosystem::Maven => {
                    let m = &mut out.maven;
                    m.total += 1;
                    if !zombie {
                        m.live += 1;
                    } else {
                        let k = &mut m.zombie.known_start;
                        m.zombie.total += 1;
                        k.total += 1;
                        if !l.publishes.iter().any(|p| *p >= zb) {
                            k.no_changes_while_zombie += 1;
                        } else {
                            let n = &mut k.new_versions_while_zombie;
                            n.total += 1;
                            match &rereg {
                                None => n.not_reregistered += 1,
                                Some(rr) => {
                                    n.reregistered.total += 1;
                                    if l.publishes.iter().any(|p| *p >= rr.next_epoch_start) {
                                        n.reregistered.new_versions_after += 1;
                                    } else {
                                        n.reregistered.no_changes_after += 1;
                                    }
                                }
                            }
                        }
                    }
                }
                _ => {}
            }

            out.verdicts.insert(
                l.key,
                ExpectedVerdict { status, zombie_birth: zombie.then_some(zb), rereg },
            );
        }
    }

    for eco in out.summary.keys().copied().collect::<Vec<_>>() {
        if eco == Ecosystem::EnsGasless {
            continue;
        }
        for attack in [
            Attack::BulkLinkedNameCreation,
            Attack::LinkedNameSquatting,
            Attack::LinkedNameTakeover,
            Attack::LinkedResourceTakeover,
        ] {
            out.evidence.entry((attack, eco)).or_default();
        }
        // resource squatting rests on the same count as name squatting
        let squat = out.evidence[&(Attack::LinkedNameSquatting, eco)];
        out.evidence.insert((Attack::LinkedResourceSquatting, eco), squat);
    }

    for (eco, a) in active {
        let z = &zombie_days[&eco];
        let rows = wf
            .through(as_of)
            .enumerate()
            .map(|(i, date)| SeriesRow {
                date,
                active: a[i],
                zombies: z[i],
                fraction: if a[i] == 0 { 0.0 } else { z[i] as f64 / a[i] as f64 },
            })
            .collect();
        out.series.by_ecosystem.insert(eco, rows);
    }
    for (eco, per_epoch) in lifespans {
        let mut v: Vec<SurvivalObs> = per_epoch.into_values().collect();
        v.sort_by_key(|o| (o.time, o.event));
        out.lifespans.insert(eco, v);
    }
    for g in out.gaps.values_mut() {
        g.0.sort_unstable();
        g.1.sort_unstable();
    }
    Ok(out)
}
