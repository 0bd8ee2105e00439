//! Ecosystem adapters: raw per-ecosystem records become uniform [`Linkage`]s
//! with a birth and (optionally) a death.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::day::DayDate;
use crate::error::{Error, Result};
use crate::suffix::SuffixRules;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ecosystem {
    Webpki,
    EnsOnchain,
    EnsGasless,
    Maven,
}

impl Ecosystem {
    pub const ALL: [Ecosystem; 4] = [
        Ecosystem::Webpki,
        Ecosystem::EnsOnchain,
        Ecosystem::EnsGasless,
        Ecosystem::Maven,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ecosystem::Webpki => "webpki",
            Ecosystem::EnsOnchain => "ens_onchain",
            Ecosystem::EnsGasless => "ens_gasless",
            Ecosystem::Maven => "maven",
        }
    }

    /// DNS control is checked only when the linkage is created.
    pub fn validates_once(self) -> bool {
        matches!(self, Ecosystem::EnsOnchain | Ecosystem::Maven)
    }
}

impl fmt::Display for Ecosystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ecosystem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ecosystem::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidParams(format!(
                    "unknown ecosystem `{s}` (expected webpki, ens_onchain, ens_gasless or maven)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathCause {
    Expired,
    Revoked,
    Overwritten,
}

pub const META_NOT_AFTER: &str = "not_after";
pub const META_REVOKED: &str = "revoked";
pub const META_VERSIONS: &str = "versions";
pub const META_TXN: &str = "txn";

/// A binding from a DNS name to an identifier in another ecosystem.
///
/// `death` is the first day the entry is no longer valid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Linkage {
    pub ecosystem: Ecosystem,
    pub dns_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fqdn: Option<String>,
    pub linked_name: String,
    pub birth: DayDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death: Option<DayDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death_cause: Option<DeathCause>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Linkage {
    pub fn is_active_on(&self, day: DayDate) -> bool {
        self.birth <= day && self.death.is_none_or(|death| day < death)
    }

    /// Publish dates of every version under a Maven namespace, sorted.
    pub fn publish_days(&self) -> Vec<DayDate> {
        self.metadata
            .get(META_VERSIONS)
            .map(|v| v.split_whitespace().filter_map(|s| s.parse().ok()).collect())
            .unwrap_or_default()
    }

    pub fn not_after(&self) -> Option<DayDate> {
        self.metadata.get(META_NOT_AFTER).and_then(|s| s.parse().ok())
    }

    fn check(&self) -> bool {
        self.death.is_none_or(|d| d >= self.birth)
            && self.death.is_some() == self.death_cause.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateRecord {
    pub fqdn: String,
    pub not_before: DayDate,
    pub not_after: DayDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revocation_time: Option<DayDate>,
    pub fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsClaimEvent {
    pub dns_name: String,
    pub block_time: DayDate,
    pub wallet: String,
    pub txn: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MavenVersionRecord {
    pub namespace: String,
    pub artifact: String,
    pub version: String,
    pub publish_time: DayDate,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaslessTxtRecord {
    pub dns_name: String,
    pub txt_value: String,
    pub observed: DayDate,
}

pub const DEFAULT_GASLESS_PREFIX: &str = "ENS1";

pub fn normalize_dns_name(name: &str, rules: &SuffixRules) -> Result<String> {
    rules.registrable_domain(name)
}

fn sort_linkages(out: &mut [Linkage]) {
    out.sort_by(|a, b| {
        (&a.dns_name, a.birth, &a.linked_name).cmp(&(&b.dns_name, b.birth, &b.linked_name))
    });
}

/// Birth is `not_before`; death is the earlier of expiry and revocation.
/// Duplicate log entries for the same fingerprint collapse to one linkage.
pub fn linkages_from_certificates(certs: &[CertificateRecord], rules: &SuffixRules) -> Vec<Linkage> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for cert in certs {
        if !seen.insert(cert.fingerprint.as_str()) {
            continue;
        }
        if cert.not_before > cert.not_after
            || cert.revocation_time.is_some_and(|r| r < cert.not_before)
        {
            warn!("certificate {} has inconsistent validity; skipped", cert.fingerprint);
            continue;
        }
        let dns_name = match rules.registrable_domain(&cert.fqdn) {
            Ok(n) => n,
            Err(e) => {
                warn!("certificate {}: {e}; skipped", cert.fingerprint);
                continue;
            }
        };
        let (death, cause) = match cert.revocation_time {
            Some(r) if r < cert.not_after => (r, DeathCause::Revoked),
            _ => (cert.not_after, DeathCause::Expired),
        };
        let mut metadata = BTreeMap::new();
        metadata.insert(META_NOT_AFTER.to_string(), cert.not_after.to_string());
        if let Some(r) = cert.revocation_time {
            metadata.insert(META_REVOKED.to_string(), r.to_string());
        }
        out.push(Linkage {
            ecosystem: Ecosystem::Webpki,
            dns_name,
            fqdn: Some(cert.fqdn.trim_end_matches('.').to_ascii_lowercase()),
            linked_name: cert.fingerprint.clone(),
            birth: cert.not_before,
            death: Some(death),
            death_cause: Some(cause),
            metadata,
        });
    }
    sort_linkages(&mut out);
    debug_assert!(out.iter().all(Linkage::check));
    out
}

/// Each claim lives until the next claim for the same DNS name overwrites it.
pub fn linkages_from_ens_claims(events: &[EnsClaimEvent]) -> Vec<Linkage> {
    let mut by_name: BTreeMap<String, Vec<&EnsClaimEvent>> = BTreeMap::new();
    for ev in events {
        let name = ev.dns_name.trim().trim_end_matches('.').to_ascii_lowercase();
        by_name.entry(name).or_default().push(ev);
    }
    let mut out = Vec::with_capacity(events.len());
    for (name, mut claims) in by_name {
        claims.sort_by(|a, b| (a.block_time, &a.txn).cmp(&(b.block_time, &b.txn)));
        for (i, ev) in claims.iter().enumerate() {
            let next = claims.get(i + 1).map(|n| n.block_time);
            let mut metadata = BTreeMap::new();
            metadata.insert(META_TXN.to_string(), ev.txn.clone());
            out.push(Linkage {
                ecosystem: Ecosystem::EnsOnchain,
                dns_name: name.clone(),
                fqdn: None,
                linked_name: ev.wallet.clone(),
                birth: ev.block_time,
                death: next,
                death_cause: next.map(|_| DeathCause::Overwritten),
                metadata,
            });
        }
    }
    sort_linkages(&mut out);
    out
}

/// TXT records of the form `<prefix> <payload>` become deathless gasless
/// linkages keyed by payload. Repeated sightings keep the earliest day.
pub fn match_gasless_txt(records: &[GaslessTxtRecord], prefix: &str) -> Result<Vec<Linkage>> {
    if prefix.is_empty() {
        return Err(Error::InvalidParams("gasless TXT prefix must be non-empty".into()));
    }
    let mut earliest: BTreeMap<(String, String), DayDate> = BTreeMap::new();
    for rec in records {
        let txt = rec.txt_value.trim().trim_matches('"');
        let Some(rest) = txt.strip_prefix(prefix) else {
            continue;
        };
        if !(rest.is_empty() || rest.starts_with(char::is_whitespace)) {
            continue;
        }
        let name = rec.dns_name.trim().trim_end_matches('.').to_ascii_lowercase();
        let day = earliest.entry((name, rest.trim().to_string())).or_insert(rec.observed);
        *day = (*day).min(rec.observed);
    }
    let mut out: Vec<Linkage> = earliest
        .into_iter()
        .map(|((dns_name, linked_name), birth)| Linkage {
            ecosystem: Ecosystem::EnsGasless,
            dns_name,
            fqdn: None,
            linked_name,
            birth,
            death: None,
            death_cause: None,
            metadata: BTreeMap::new(),
        })
        .collect();
    sort_linkages(&mut out);
    Ok(out)
}

/// `com.example.lib` becomes `lib.example.com`; `None` for single labels.
pub fn reverse_namespace(namespace: &str) -> Option<String> {
    let labels: Vec<&str> = namespace.trim().split('.').collect();
    if labels.len() < 2 || labels.iter().any(|l| l.is_empty()) {
        return None;
    }
    Some(labels.into_iter().rev().collect::<Vec<_>>().join("."))
}

/// One deathless linkage per namespace, born with its first published
/// version. The full publish timeline is kept in metadata.
pub fn linkages_from_maven_index(versions: &[MavenVersionRecord], rules: &SuffixRules) -> Vec<Linkage> {
    let mut by_ns: BTreeMap<String, Vec<DayDate>> = BTreeMap::new();
    for v in versions {
        by_ns
            .entry(v.namespace.trim().to_ascii_lowercase())
            .or_default()
            .push(v.publish_time);
    }
    let mut out = Vec::with_capacity(by_ns.len());
    for (ns, mut days) in by_ns {
        let Some(fqdn) = reverse_namespace(&ns) else {
            warn!("maven namespace `{ns}` is not reverse-DNS; skipped");
            continue;
        };
        let dns_name = match rules.registrable_domain(&fqdn) {
            Ok(n) => n,
            Err(e) => {
                warn!("maven namespace `{ns}`: {e}; skipped");
                continue;
            }
        };
        days.sort_unstable();
        days.dedup();
        let timeline = days.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
        let mut metadata = BTreeMap::new();
        metadata.insert(META_VERSIONS.to_string(), timeline);
        out.push(Linkage {
            ecosystem: Ecosystem::Maven,
            dns_name,
            fqdn: Some(fqdn),
            linked_name: ns,
            birth: days[0],
            death: None,
            death_cause: None,
            metadata,
        });
    }
    sort_linkages(&mut out);
    out
}
