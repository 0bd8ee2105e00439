//! Helpers shared by the CLI integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use dnszombie::dataio::save_jsonl;
use dnszombie::epoch::{EpochInferenceParams, EpochTimeline, IntervalOrigin, ObservationWindow, OwnershipInterval};
use dnszombie::linkage::{CertificateRecord, Ecosystem, EnsClaimEvent, MavenVersionRecord};
use dnszombie::DayDate;
use serde::Deserialize;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub as_of: DayDate,
    pub window_start: DayDate,
    pub window_end: DayDate,
    pub category: Vec<Category>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Category {
    pub name: String,
    pub ecosystem: Ecosystem,
    pub count: usize,
    pub epochs: Vec<EpochSpec>,
    #[serde(default)]
    pub events: Vec<DayDate>,
    pub certificate: Option<CertSpec>,
    pub revoked: Option<RevokedSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochSpec {
    pub start: DayDate,
    pub end: DayDate,
    #[serde(default)]
    pub start_closed: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertSpec {
    pub not_before: DayDate,
    pub not_after: DayDate,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevokedSpec {
    pub count: usize,
    pub on: DayDate,
}

pub fn load_template(path: &Path) -> Template {
    toml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes epochs and raw ecosystem records for every category copy into
/// `dir`.
pub fn expand_template(t: &Template, dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let window = ObservationWindow::new(t.window_start, t.window_end).unwrap();
    let mut timelines = Vec::new();
    let mut claims = Vec::new();
    let mut versions = Vec::new();
    let mut certs = Vec::new();
    for c in &t.category {
        for i in 0..c.count {
            let label = format!("{}{i:05}", c.name);
            let domain = format!("{label}.com");
            let n = c.epochs.len();
            let intervals = c
                .epochs
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let right_censored = e.end >= window.last;
                    OwnershipInterval {
                        start: e.start,
                        end: e.end,
                        start_closed: e.start_closed,
                        right_censored,
                        merge_next: false,
                        end_confirmed: !right_censored && (k + 1 < n || window.last.days_since(e.end) >= 80),
                        origin: IntervalOrigin::Observed,
                    }
                })
                .collect();
            timelines.push(EpochTimeline {
                domain: domain.clone(),
                intervals,
                params: EpochInferenceParams::default(),
                window,
            });
            match c.ecosystem {
                Ecosystem::EnsOnchain => {
                    for (k, day) in c.events.iter().enumerate() {
                        claims.push(EnsClaimEvent {
                            dns_name: domain.clone(),
                            block_time: *day,
                            wallet: format!("0x{:040x}", claims.len() + 1),
                            txn: format!("0x{label}{k}"),
                        });
                    }
                }
                Ecosystem::Maven => {
                    for (k, day) in c.events.iter().enumerate() {
                        versions.push(MavenVersionRecord {
                            namespace: format!("com.{label}"),
                            artifact: "core".into(),
                            version: format!("1.0.{k}"),
                            publish_time: *day,
                        });
                    }
                }
                Ecosystem::Webpki => {
                    let spec = c.certificate.as_ref().expect("certificate categories need a certificate");
                    let revoked = c.revoked.as_ref().filter(|r| i < r.count).map(|r| r.on);
                    certs.push(CertificateRecord {
                        fqdn: domain.clone(),
                        not_before: spec.not_before,
                        not_after: spec.not_after,
                        revocation_time: revoked,
                        fingerprint: format!("{label}-fp"),
                    });
                }
                Ecosystem::EnsGasless => panic!("gasless categories are not supported"),
            }
        }
    }
    save_jsonl(&dir.join("epochs.jsonl"), &timelines).unwrap();
    save_jsonl(&dir.join("ens_claims.jsonl"), &claims).unwrap();
    save_jsonl(&dir.join("maven_versions.jsonl"), &versions).unwrap();
    save_jsonl(&dir.join("certificates.jsonl"), &certs).unwrap();
}

/// `(metric, ecosystem) -> value` from a report's summary table.
pub fn read_summary(path: &Path) -> std::collections::BTreeMap<(String, String), String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            ((rec[0].to_string(), rec[1].to_string()), rec[2].to_string())
        })
        .collect()
}

pub fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}
