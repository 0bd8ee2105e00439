//! Attack-surface evidence derived from zombie verdicts: short-lived
//! registrations, certificates served after DNS death or re-registration,
//! revocation rates, Maven publishing activity and the attack indicator
//! matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::classify::{VerdictStatus, ZombieVerdict};
use crate::day::DayDate;
use crate::error::{Error, Result};
use crate::linkage::{DeathCause, Ecosystem};
use crate::stats::Ecdf;

pub const DEFAULT_AGP_DAYS: i32 = 5;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ServingObservation {
    pub fingerprint: String,
    pub date: DayDate,
    pub served: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgpStats {
    pub agp_days: i32,
    /// Zombies whose birth epoch is known.
    pub zombies: usize,
    pub within_agp: usize,
    /// Birth-epoch length in days -> number of zombies.
    pub lifespan_histogram: BTreeMap<i32, usize>,
}

impl AgpStats {
    pub fn fraction(&self) -> f64 {
        ratio(self.within_agp, self.zombies)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// How many zombies come from registrations that lasted no longer than the
/// add grace period.
pub fn agp_death_stats(verdicts: &[ZombieVerdict], agp_days: i32) -> AgpStats {
    let mut stats = AgpStats { agp_days, ..Default::default() };
    for v in verdicts.iter().filter(|v| v.zombie_start_known()) {
        let Some(epoch) = &v.birth_epoch else { continue };
        let len = epoch.len_days();
        stats.zombies += 1;
        stats.within_agp += usize::from(len <= agp_days);
        *stats.lifespan_histogram.entry(len).or_default() += 1;
    }
    stats
}

/// Served days per certificate fingerprint.
fn served_index(serving: &[ServingObservation]) -> HashMap<&str, BTreeSet<DayDate>> {
    let mut idx: HashMap<&str, BTreeSet<DayDate>> = HashMap::new();
    for obs in serving.iter().filter(|o| o.served) {
        idx.entry(obs.fingerprint.as_str()).or_default().insert(obs.date);
    }
    idx
}

fn count_in(days: Option<&BTreeSet<DayDate>>, from: DayDate, to: DayDate) -> i32 {
    if from > to {
        return 0;
    }
    days.map_or(0, |d| d.range(from..=to).count() as i32)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ServedReport {
    /// `(fingerprint, days served)` for every Web PKI zombie with a known start.
    pub per_certificate: Vec<(String, i32)>,
    pub days_served: Ecdf,
    /// Served observations that fall outside the certificate's validity.
    pub ignored_observations: usize,
}

impl ServedReport {
    pub fn never_served_fraction(&self) -> f64 {
        self.days_served.fraction_le(0.0)
    }

    pub fn served_at_least_fraction(&self, days: i32) -> f64 {
        if self.days_served.is_empty() {
            0.0
        } else {
            1.0 - self.days_served.fraction_le(f64::from(days) - 0.5)
        }
    }
}

fn webpki_zombies(verdicts: &[ZombieVerdict]) -> impl Iterator<Item = &ZombieVerdict> {
    verdicts
        .iter()
        .filter(|v| v.linkage.ecosystem == Ecosystem::Webpki && v.is_zombie())
}

/// Days each zombie certificate was seen served between zombie birth and the
/// end of its zombie window.
pub fn served_after_death(serving: &[ServingObservation], verdicts: &[ZombieVerdict]) -> ServedReport {
    let idx = served_index(serving);
    let mut report = ServedReport::default();
    let mut days = Vec::new();
    for v in webpki_zombies(verdicts) {
        let fp = v.linkage.linked_name.as_str();
        let served = idx.get(fp);
        if let Some(s) = served {
            report.ignored_observations += s
                .iter()
                .filter(|d| **d < v.linkage.birth || v.linkage.death.is_some_and(|death| **d > death))
                .count();
        }
        let (Some(zb), Some(end)) = (v.zombie_birth, v.zombie_window_end()) else { continue };
        let n = count_in(served, zb, end);
        report.per_certificate.push((fp.to_string(), n));
        days.push(n);
    }
    if report.ignored_observations > 0 {
        warn!(
            "{} serving observations fall outside certificate validity; ignored",
            report.ignored_observations
        );
    }
    report.days_served = Ecdf::from_days(days);
    report
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReregServedReport {
    pub zombies: usize,
    /// Zombies still valid when their DNS name was registered again.
    pub overlapping: usize,
    /// Overlapping zombies seen served on or after the re-registration.
    pub served_past: usize,
    pub per_certificate: Vec<(String, i32)>,
    /// Days served after re-registration, over `served_past` certificates.
    pub days_served: Ecdf,
}

pub fn served_after_rereg(serving: &[ServingObservation], verdicts: &[ZombieVerdict]) -> ReregServedReport {
    let idx = served_index(serving);
    let mut report = ReregServedReport::default();
    let mut days = Vec::new();
    for v in webpki_zombies(verdicts) {
        report.zombies += 1;
        let Some(rr) = v.rereg.as_ref().filter(|r| r.overlaps_linkage_validity) else { continue };
        report.overlapping += 1;
        let Some(end) = v.zombie_window_end() else { continue };
        let fp = v.linkage.linked_name.as_str();
        let n = count_in(idx.get(fp), rr.next_epoch_start, end);
        report.per_certificate.push((fp.to_string(), n));
        if n > 0 {
            report.served_past += 1;
            days.push(n);
        }
    }
    report.days_served = Ecdf::from_days(days);
    report
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RevocationComparison {
    pub rereg_total: usize,
    pub rereg_revoked: usize,
    pub no_rereg_total: usize,
    pub no_rereg_revoked: usize,
}

impl RevocationComparison {
    pub fn rate_rereg(&self) -> f64 {
        ratio(self.rereg_revoked, self.rereg_total)
    }

    pub fn rate_no_rereg(&self) -> f64 {
        ratio(self.no_rereg_revoked, self.no_rereg_total)
    }

    /// `None` when the no-re-registration rate is zero.
    pub fn ratio(&self) -> Option<f64> {
        let base = self.rate_no_rereg();
        (base > 0.0).then(|| self.rate_rereg() / base)
    }
}

/// Revocation rates of Web PKI zombies, split by whether the DNS name was
/// registered again while the certificate was still valid.
pub fn revocation_comparison(verdicts: &[ZombieVerdict]) -> RevocationComparison {
    let mut out = RevocationComparison::default();
    for v in webpki_zombies(verdicts) {
        let revoked = v.linkage.death_cause == Some(DeathCause::Revoked);
        if v.rereg.as_ref().is_some_and(|r| r.overlaps_linkage_validity) {
            out.rereg_total += 1;
            out.rereg_revoked += usize::from(revoked);
        } else {
            out.no_rereg_total += 1;
            out.no_rereg_revoked += usize::from(revoked);
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReregisteredActivity {
    pub total: usize,
    pub no_changes_after: usize,
    pub new_versions_after: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewVersionsWhileZombie {
    pub total: usize,
    pub not_reregistered: usize,
    pub reregistered: ReregisteredActivity,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownStartZombies {
    pub total: usize,
    pub no_changes_while_zombie: usize,
    pub new_versions_while_zombie: NewVersionsWhileZombie,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZombieNamespaces {
    pub total: usize,
    pub unknown_start: usize,
    pub known_start: KnownStartZombies,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MavenActivityBreakdown {
    pub total: usize,
    pub live: usize,
    /// Namespaces whose registration history could not be resolved.
    pub indeterminate: usize,
    pub zombie: ZombieNamespaces,
}

impl MavenActivityBreakdown {
    pub fn is_consistent(&self) -> bool {
        let z = &self.zombie;
        let k = &z.known_start;
        let n = &k.new_versions_while_zombie;
        let r = &n.reregistered;
        self.total == self.live + self.indeterminate + z.total
            && z.total == z.unknown_start + k.total
            && k.total == k.no_changes_while_zombie + n.total
            && n.total == n.not_reregistered + r.total
            && r.total == r.no_changes_after + r.new_versions_after
    }

    /// `(label, depth, count)` rows in display order.
    pub fn rows(&self) -> Vec<(&'static str, usize, usize)> {
        let z = &self.zombie;
        let k = &z.known_start;
        let n = &k.new_versions_while_zombie;
        let r = &n.reregistered;
        vec![
            ("total", 0, self.total),
            ("live", 1, self.live),
            ("indeterminate", 1, self.indeterminate),
            ("zombie", 1, z.total),
            ("zombie_unknown_start", 2, z.unknown_start),
            ("zombie_known_start", 2, k.total),
            ("no_changes_while_zombie", 3, k.no_changes_while_zombie),
            ("new_versions_while_zombie", 3, n.total),
            ("not_reregistered", 4, n.not_reregistered),
            ("reregistered", 4, r.total),
            ("no_changes_after_rereg", 5, r.no_changes_after),
            ("new_versions_after_rereg", 5, r.new_versions_after),
        ]
    }
}

/// Buckets Maven namespace verdicts by publishing activity after the
/// namespace turned into a zombie and after its domain was re-registered.
pub fn maven_activity_breakdown(verdicts: &[ZombieVerdict]) -> MavenActivityBreakdown {
    let mut b = MavenActivityBreakdown::default();
    for v in verdicts.iter().filter(|v| v.linkage.ecosystem == Ecosystem::Maven) {
        b.total += 1;
        match v.status {
            VerdictStatus::Live => {
                b.live += 1;
                continue;
            }
            VerdictStatus::Zombie => {}
            VerdictStatus::Indeterminate | VerdictStatus::Exempt => {
                b.indeterminate += 1;
                continue;
            }
        }
        let z = &mut b.zombie;
        z.total += 1;
        let Some(zb) = v.zombie_birth else {
            z.unknown_start += 1;
            continue;
        };
        let k = &mut z.known_start;
        k.total += 1;
        let publishes = v.linkage.publish_days();
        if !publishes.iter().any(|p| *p >= zb) {
            k.no_changes_while_zombie += 1;
            continue;
        }
        let n = &mut k.new_versions_while_zombie;
        n.total += 1;
        let Some(rr) = &v.rereg else {
            n.not_reregistered += 1;
            continue;
        };
        n.reregistered.total += 1;
        if publishes.iter().any(|p| *p >= rr.next_epoch_start) {
            n.reregistered.new_versions_after += 1;
        } else {
            n.reregistered.no_changes_after += 1;
        }
    }
    debug_assert!(b.is_consistent());
    b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attack {
    BulkLinkedNameCreation,
    LinkedNameSquatting,
    LinkedResourceSquatting,
    LinkedNameTakeover,
    LinkedResourceTakeover,
}

impl Attack {
    pub const ALL: [Attack; 5] = [
        Attack::BulkLinkedNameCreation,
        Attack::LinkedNameSquatting,
        Attack::LinkedResourceSquatting,
        Attack::LinkedNameTakeover,
        Attack::LinkedResourceTakeover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attack::BulkLinkedNameCreation => "bulk_linked_name_creation",
            Attack::LinkedNameSquatting => "linked_name_squatting",
            Attack::LinkedResourceSquatting => "linked_resource_squatting",
            Attack::LinkedNameTakeover => "linked_name_takeover",
            Attack::LinkedResourceTakeover => "linked_resource_takeover",
        }
    }

    fn targets_resource(self) -> bool {
        matches!(self, Attack::LinkedResourceSquatting | Attack::LinkedResourceTakeover)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Prevented,
    NoEvidence,
    Insufficient,
    Available,
    Escalates,
}

impl Indicator {
    pub fn as_str(self) -> &'static str {
        match self {
            Indicator::Prevented => "prevented",
            Indicator::NoEvidence => "no_evidence",
            Indicator::Insufficient => "insufficient",
            Indicator::Available => "available",
            Indicator::Escalates => "escalates",
        }
    }
}

/// Properties of an ecosystem's design that settle some cells of the matrix
/// without looking at data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFacts {
    /// Linked resources are bound to a key independent of the linked name.
    pub resource_independence: bool,
    /// The linkage is re-checked against DNS whenever it is used.
    #[serde(default)]
    pub validate_on_use: bool,
    /// Linkages expire on their own.
    #[serde(default)]
    pub expiry: bool,
    /// Cells the available data cannot speak to.
    #[serde(default)]
    pub insufficient_data: Vec<Attack>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default)]
    pub ecosystems: BTreeMap<Ecosystem, DesignFacts>,
    /// Minimum share of the population an attack's supporting count must
    /// reach before the attack is marked available. Missing entries mean 0.
    #[serde(default)]
    pub min_fraction: BTreeMap<Attack, f64>,
}

impl DesignConfig {
    /// Design facts of the ecosystems in the study.
    pub fn standard() -> Self {
        let mut ecosystems = BTreeMap::new();
        ecosystems.insert(
            Ecosystem::Webpki,
            DesignFacts {
                resource_independence: true,
                validate_on_use: false,
                expiry: true,
                insufficient_data: vec![Attack::LinkedNameTakeover],
            },
        );
        ecosystems.insert(
            Ecosystem::EnsOnchain,
            DesignFacts { resource_independence: true, ..Default::default() },
        );
        ecosystems.insert(Ecosystem::Maven, DesignFacts::default());
        ecosystems.insert(
            Ecosystem::EnsGasless,
            DesignFacts { resource_independence: true, validate_on_use: true, ..Default::default() },
        );
        DesignConfig { ecosystems, min_fraction: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for (attack, f) in &self.min_fraction {
            if !(0.0..=1.0).contains(f) {
                return Err(Error::InvalidParams(format!(
                    "min_fraction for {} must lie in [0, 1], got {f}",
                    attack.as_str()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorCell {
    pub attack: Attack,
    pub ecosystem: Ecosystem,
    pub indicator: Indicator,
    /// Count the data-driven verdict rests on, if one was computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supporting_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IndicatorMatrix {
    pub cells: Vec<IndicatorCell>,
}

impl IndicatorMatrix {
    pub fn get(&self, attack: Attack, ecosystem: Ecosystem) -> Option<&IndicatorCell> {
        self.cells
            .iter()
            .find(|c| c.attack == attack && c.ecosystem == ecosystem)
    }
}

/// `(supporting, population)` for an attack in one ecosystem.
fn evidence(attack: Attack, verdicts: &[&ZombieVerdict], agp_days: i32) -> (usize, usize) {
    let zombies = || verdicts.iter().filter(|v| v.is_zombie());
    match attack {
        Attack::BulkLinkedNameCreation => {
            let known: Vec<_> = verdicts.iter().copied().filter(|v| v.zombie_start_known()).collect();
            let short = known
                .iter()
                .filter(|v| v.birth_epoch.as_ref().is_some_and(|e| e.len_days() <= agp_days))
                .count();
            (short, known.len())
        }
        Attack::LinkedNameSquatting | Attack::LinkedResourceSquatting => {
            let active = verdicts.iter().filter(|v| v.linkage.is_active_on(v.as_of)).count();
            (zombies().filter(|v| v.is_active_zombie()).count(), active)
        }
        Attack::LinkedNameTakeover => {
            let overwritten = zombies()
                .filter(|v| {
                    v.linkage.death_cause == Some(DeathCause::Overwritten)
                        && v.zombie_from().zip(v.linkage.death).is_some_and(|(from, d)| d >= from)
                })
                .count();
            (overwritten, zombies().count())
        }
        Attack::LinkedResourceTakeover => {
            let rereg = zombies()
                .filter(|v| v.rereg.as_ref().is_some_and(|r| r.overlaps_linkage_validity))
                .count();
            (rereg, zombies().count())
        }
    }
}

/// Builds the matrix for `ecosystems`. Design facts decide prevented and
/// escalating cells; the rest are available when the supporting count is
/// positive and reaches the configured share of its population.
pub fn indicator_matrix(
    verdicts: &[ZombieVerdict],
    ecosystems: &[Ecosystem],
    design: &DesignConfig,
    agp_days: i32,
) -> Result<IndicatorMatrix> {
    design.validate()?;
    let mut by_eco: BTreeMap<Ecosystem, Vec<&ZombieVerdict>> = BTreeMap::new();
    for v in verdicts {
        by_eco.entry(v.linkage.ecosystem).or_default().push(v);
    }
    let mut cells = Vec::new();
    for attack in Attack::ALL {
        for &eco in ecosystems {
            let facts = design
                .ecosystems
                .get(&eco)
                .ok_or_else(|| Error::MissingDesignEntry(eco.to_string()))?;
            let mut cell = IndicatorCell {
                attack,
                ecosystem: eco,
                indicator: Indicator::Insufficient,
                supporting_count: None,
                population: None,
            };
            if facts.validate_on_use || (attack.targets_resource() && facts.resource_independence) {
                cell.indicator = Indicator::Prevented;
            } else if !facts.resource_independence
                && matches!(attack, Attack::LinkedNameSquatting | Attack::LinkedNameTakeover)
            {
                cell.indicator = Indicator::Escalates;
            } else if facts.insufficient_data.contains(&attack) {
                cell.indicator = Indicator::Insufficient;
            } else {
                let vs = by_eco.get(&eco).map(Vec::as_slice).unwrap_or(&[]);
                let (count, population) = evidence(attack, vs, agp_days);
                cell.supporting_count = Some(count);
                cell.population = Some(population);
                let min = design.min_fraction.get(&attack).copied().unwrap_or(0.0);
                cell.indicator = if population == 0 {
                    Indicator::Insufficient
                } else if count > 0 && ratio(count, population) >= min {
                    Indicator::Available
                } else {
                    Indicator::NoEvidence
                };
            }
            cells.push(cell);
        }
    }
    Ok(IndicatorMatrix { cells })
}
