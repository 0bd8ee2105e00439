//! Joins linkages with inferred epoch timelines to decide which linkages are
//! zombies: still valid although the registration they were created under
//! has ended.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::day::DayDate;
use crate::epoch::{EpochTimeline, OwnershipInterval};
use crate::error::{Error, Result};
use crate::linkage::{Ecosystem, Linkage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Live,
    Zombie,
    Indeterminate,
    Exempt,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReRegistrationInfo {
    pub next_epoch_start: DayDate,
    /// The new registration begins while the linkage is still valid.
    pub overlaps_linkage_validity: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZombieVerdict {
    pub linkage: Linkage,
    pub as_of: DayDate,
    pub status: VerdictStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth_epoch: Option<OwnershipInterval>,
    /// First day after the birth epoch ended. Absent for zombies whose
    /// creating registration predates the observation data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zombie_birth: Option<DayDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zombie_death: Option<DayDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rereg: Option<ReRegistrationInfo>,
}

impl ZombieVerdict {
    pub fn is_zombie(&self) -> bool {
        self.status == VerdictStatus::Zombie
    }

    pub fn zombie_start_known(&self) -> bool {
        self.is_zombie() && self.zombie_birth.is_some()
    }

    /// First day this linkage counts as a zombie, if it is one.
    pub fn zombie_from(&self) -> Option<DayDate> {
        if !self.is_zombie() {
            return None;
        }
        self.zombie_birth
            .or_else(|| self.rereg.as_ref().map(|r| r.next_epoch_start))
    }

    /// Last day of the zombie window, counting the death day itself.
    pub fn zombie_window_end(&self) -> Option<DayDate> {
        self.zombie_from()?;
        Some(self.linkage.death.map_or(self.as_of, |d| d.min(self.as_of)))
    }

    pub fn is_active_zombie(&self) -> bool {
        self.is_zombie() && self.linkage.is_active_on(self.as_of)
    }
}

/// When (if ever) a linkage turns into a zombie, judged with the full
/// timeline in hand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Onset {
    Exempt,
    Never,
    Known(DayDate),
    /// Birth is not covered by any interval, but an authoritative
    /// registration started later while the linkage was still valid.
    UnknownStart(DayDate),
    Indeterminate,
}

fn onset(linkage: &Linkage, timeline: &EpochTimeline) -> (Onset, Option<usize>) {
    if linkage.ecosystem == Ecosystem::EnsGasless {
        return (Onset::Exempt, None);
    }
    let valid_on = |day: DayDate| linkage.death.is_none_or(|d| day < d);
    match timeline.position_of(linkage.birth) {
        Some(i) => {
            let epoch = &timeline.intervals[i];
            if epoch.end_confirmed && !epoch.right_censored {
                let zb = epoch.end.succ();
                let o = if valid_on(zb) { Onset::Known(zb) } else { Onset::Never };
                (o, Some(i))
            } else {
                (Onset::Never, Some(i))
            }
        }
        None => {
            let later = timeline
                .intervals
                .iter()
                .find(|iv| iv.start > linkage.birth && iv.start_closed);
            match later {
                Some(iv) if valid_on(iv.start) => (Onset::UnknownStart(iv.start), None),
                _ => (Onset::Indeterminate, None),
            }
        }
    }
}

/// Classifies one linkage against the timeline of its DNS name as of
/// `as_of`.
pub fn classify_linkage(
    linkage: &Linkage,
    timeline: &EpochTimeline,
    as_of: DayDate,
) -> Result<ZombieVerdict> {
    if timeline.domain != linkage.dns_name {
        return Err(Error::DomainMismatch {
            linkage: linkage.dns_name.clone(),
            timeline: timeline.domain.clone(),
        });
    }
    let (onset, epoch_idx) = onset(linkage, timeline);
    let mut v = ZombieVerdict {
        linkage: linkage.clone(),
        as_of,
        status: VerdictStatus::Live,
        birth_epoch: epoch_idx.map(|i| timeline.intervals[i].clone()),
        zombie_birth: None,
        zombie_death: None,
        rereg: None,
    };
    match onset {
        Onset::Exempt => v.status = VerdictStatus::Exempt,
        Onset::Never => {}
        Onset::Known(zb) if zb <= as_of => {
            v.status = VerdictStatus::Zombie;
            v.zombie_birth = Some(zb);
        }
        Onset::Known(_) => {}
        Onset::UnknownStart(start) if start <= as_of => {
            v.status = VerdictStatus::Zombie;
            v.rereg = Some(ReRegistrationInfo {
                next_epoch_start: start,
                overlaps_linkage_validity: true,
            });
        }
        Onset::UnknownStart(_) | Onset::Indeterminate => v.status = VerdictStatus::Indeterminate,
    }
    if v.is_zombie() {
        v.zombie_death = linkage.death.map(|d| d.min(as_of));
    }
    if let Some(i) = epoch_idx {
        if let Some(next) = timeline.intervals.get(i + 1).filter(|n| n.start <= as_of) {
            v.rereg = Some(ReRegistrationInfo {
                next_epoch_start: next.start,
                overlaps_linkage_validity: linkage.death.is_none_or(|d| next.start <= d),
            });
        }
    }
    Ok(v)
}

/// A verdict for a linkage whose DNS name has no timeline at all.
pub fn unobserved_verdict(linkage: &Linkage, as_of: DayDate) -> ZombieVerdict {
    ZombieVerdict {
        linkage: linkage.clone(),
        as_of,
        status: if linkage.ecosystem == Ecosystem::EnsGasless {
            VerdictStatus::Exempt
        } else {
            VerdictStatus::Indeterminate
        },
        birth_epoch: None,
        zombie_birth: None,
        zombie_death: None,
        rereg: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZombieDuration {
    pub days: i32,
    /// The linkage is still valid at `as_of`, so the true duration is longer.
    pub censored: bool,
}

/// Inclusive day count from zombie birth to the earlier of linkage death
/// and `as_of`.
pub fn zombie_duration(verdict: &ZombieVerdict, as_of: DayDate) -> Result<ZombieDuration> {
    let zb = verdict
        .zombie_birth
        .filter(|_| verdict.is_zombie())
        .ok_or(Error::NotZombie)?;
    let end = verdict.linkage.death.map_or(as_of, |d| d.min(as_of));
    Ok(ZombieDuration {
        days: end.days_since(zb) + 1,
        censored: verdict.linkage.death.is_none_or(|d| d > as_of),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EcosystemSummary {
    pub total: usize,
    /// Linkages valid on `as_of`.
    pub active: usize,
    /// Active linkages that are zombies on `as_of`.
    pub active_zombies: usize,
    /// Every linkage that has been a zombie at some point up to `as_of`.
    pub zombies: usize,
    pub live: usize,
    pub indeterminate: usize,
    pub exempt: usize,
}

impl EcosystemSummary {
    pub fn zombie_fraction(&self) -> f64 {
        if self.active == 0 {
            0.0
        } else {
            self.active_zombies as f64 / self.active as f64
        }
    }

    fn add(&mut self, v: &ZombieVerdict) {
        self.total += 1;
        let active = v.linkage.is_active_on(v.as_of);
        self.active += usize::from(active);
        match v.status {
            VerdictStatus::Live => self.live += 1,
            VerdictStatus::Zombie => {
                self.zombies += 1;
                self.active_zombies += usize::from(active);
            }
            VerdictStatus::Indeterminate => self.indeterminate += 1,
            VerdictStatus::Exempt => self.exempt += 1,
        }
    }
}

pub fn summarize(verdicts: &[ZombieVerdict]) -> BTreeMap<Ecosystem, EcosystemSummary> {
    let mut out: BTreeMap<Ecosystem, EcosystemSummary> = BTreeMap::new();
    for v in verdicts {
        out.entry(v.linkage.ecosystem).or_default().add(v);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome {
    pub verdicts: Vec<ZombieVerdict>,
    pub summary: BTreeMap<Ecosystem, EcosystemSummary>,
}

/// Classifies every linkage; names without a timeline are indeterminate.
pub fn batch_classify(
    linkages: &[Linkage],
    timelines: &HashMap<String, EpochTimeline>,
    as_of: DayDate,
) -> BatchOutcome {
    let verdicts: Vec<ZombieVerdict> = linkages
        .iter()
        .map(|l| match timelines.get(&l.dns_name) {
            Some(tl) => classify_linkage(l, tl, as_of).expect("timeline looked up by dns_name"),
            None => unobserved_verdict(l, as_of),
        })
        .collect();
    let summary = summarize(&verdicts);
    BatchOutcome { verdicts, summary }
}
