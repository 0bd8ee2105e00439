use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DomainTruth, GroundTruthWorld};
use crate::dataio::{self, DomainObservations, ObservationSource};
use crate::epoch::{ObservationWindow, RdapRecord};
use crate::error::{Error, Result};
use crate::indicators::ServingObservation;
use crate::linkage::{CertificateRecord, EnsClaimEvent, GaslessTxtRecord, MavenVersionRecord};

/// Per-day and per-record coverage probabilities applied when turning a
/// world into observation files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub zone_coverage: f64,
    pub scan_coverage: f64,
    pub rdap_coverage: f64,
    pub rdap_date_omission: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::clean()
    }
}

impl NoiseModel {
    /// Every registered day is in the zone data and every registration has
    /// its RDAP records.
    pub fn clean() -> Self {
        NoiseModel { zone_coverage: 1.0, scan_coverage: 0.0, rdap_coverage: 1.0, rdap_date_omission: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("zone_coverage", self.zone_coverage),
            ("scan_coverage", self.scan_coverage),
            ("rdap_coverage", self.rdap_coverage),
            ("rdap_date_omission", self.rdap_date_omission),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParams(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Observations and RDAP records for one domain. Every registration gets a
/// positive lookup on a day it was registered, and every unregistered
/// stretch inside the window gets a negative one, before noise is applied.
pub fn observe_domain(
    truth: &DomainTruth,
    window: ObservationWindow,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> (DomainObservations, Vec<RdapRecord>) {
    let mut obs = DomainObservations::default();
    let mut rdap = Vec::new();
    let mut gap_from = window.first;
    for e in &truth.epochs {
        let (first, last) = (e.start.max(window.first), e.end.min(window.last));
        for day in first.through(last) {
            if noise.zone_coverage >= 1.0 || rng.gen_bool(noise.zone_coverage) {
                obs.insert(ObservationSource::Zone, day);
            }
            if noise.scan_coverage > 0.0 && rng.gen_bool(noise.scan_coverage) {
                obs.insert(ObservationSource::Scan, day);
            }
        }
        if gap_from < e.start {
            negative(truth, gap_from, e.start.pred(), noise, rng, &mut rdap);
        }
        let query = first + rng.gen_range(0..=last.days_since(first));
        if rng.gen_bool(noise.rdap_coverage) {
            let mut rec = RdapRecord::positive(truth.domain.clone(), query, e.start);
            if rng.gen_bool(noise.rdap_date_omission) {
                rec.registration_date = None;
            }
            rdap.push(rec);
        }
        gap_from = e.end.succ();
    }
    if gap_from <= window.last {
        negative(truth, gap_from, window.last, noise, rng, &mut rdap);
    }
    (obs, rdap)
}

fn negative(
    truth: &DomainTruth,
    from: crate::day::DayDate,
    to: crate::day::DayDate,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<RdapRecord>,
) {
    if rng.gen_bool(noise.rdap_coverage) {
        let query = from + to.days_since(from) / 2;
        out.push(RdapRecord::negative(truth.domain.clone(), query));
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedFiles {
    pub observations: PathBuf,
    pub rdap: PathBuf,
    pub certificates: PathBuf,
    pub ens_claims: PathBuf,
    pub maven_versions: PathBuf,
    pub gasless_txt: PathBuf,
    pub serving: PathBuf,
    pub truth: PathBuf,
    pub world: PathBuf,
}

impl EmittedFiles {
    pub fn in_dir(dir: &Path) -> Self {
        EmittedFiles {
            observations: dir.join("observations.csv"),
            rdap: dir.join("rdap.jsonl"),
            certificates: dir.join("certificates.jsonl"),
            ens_claims: dir.join("ens_claims.jsonl"),
            maven_versions: dir.join("maven_versions.jsonl"),
            gasless_txt: dir.join("gasless_txt.jsonl"),
            serving: dir.join("serving.csv"),
            truth: dir.join("truth.jsonl"),
            world: dir.join("world.json"),
        }
    }
}

/// Writes the world as dataio input files plus a truth file into `dir`.
/// Noise draws come from their own stream seeded with `noise_seed`.
pub fn emit_observations(
    world: &GroundTruthWorld,
    noise: &NoiseModel,
    noise_seed: u64,
    dir: &Path,
) -> Result<EmittedFiles> {
    noise.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = EmittedFiles::in_dir(dir);
    let window = world.params.window();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);

    let mut observed = Vec::with_capacity(world.domains.len());
    let mut rdap = Vec::new();
    let mut certs = Vec::new();
    let mut claims = Vec::new();
    let mut versions = Vec::new();
    let mut txt = Vec::new();
    let mut serving = Vec::new();
    for d in &world.domains {
        let (obs, recs) = observe_domain(d, window, noise, &mut rng);
        observed.push((d.domain.as_str(), obs));
        rdap.extend(recs);
        for c in &d.certificates {
            certs.push(CertificateRecord {
                fqdn: c.fqdn.clone(),
                not_before: c.not_before,
                not_after: c.not_after,
                revocation_time: c.revoked,
                fingerprint: c.fingerprint.clone(),
            });
            if let Some((from, until)) = c.served {
                for date in from.max(window.first).through(until.min(window.last)) {
                    serving.push(ServingObservation { fingerprint: c.fingerprint.clone(), date, served: true });
                }
            }
        }
        for c in &d.ens_claims {
            claims.push(EnsClaimEvent {
                dns_name: d.domain.clone(),
                block_time: c.block_time,
                wallet: c.wallet.clone(),
                txn: c.txn.clone(),
            });
        }
        for t in &d.txt_records {
            txt.push(GaslessTxtRecord { dns_name: d.domain.clone(), txt_value: t.txt_value.clone(), observed: t.observed });
        }
        if let Some(m) = &d.maven {
            for (v, day) in &m.versions {
                versions.push(MavenVersionRecord {
                    namespace: m.namespace.clone(),
                    artifact: "core".into(),
                    version: v.clone(),
                    publish_time: *day,
                });
            }
        }
    }

    let f = std::fs::File::create(&files.observations).map_err(|e| Error::io(&files.observations, e))?;
    dataio::write_observations(f, observed.iter().map(|(d, o)| (*d, o)))
        .map_err(|e| Error::io(&files.observations, e))?;
    dataio::save_jsonl(&files.rdap, &rdap)?;
    dataio::save_jsonl(&files.certificates, &certs)?;
    dataio::save_jsonl(&files.ens_claims, &claims)?;
    dataio::save_jsonl(&files.maven_versions, &versions)?;
    dataio::save_jsonl(&files.gasless_txt, &txt)?;
    dataio::save_serving(&files.serving, &serving)?;
    dataio::save_jsonl(&files.truth, &world.domains)?;
    let header = serde_json::json!({ "seed": world.seed, "noise_seed": noise_seed, "params": world.params, "noise": noise });
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    std::fs::write(&files.world, text).map_err(|e| Error::io(&files.world, e))?;
    Ok(files)
}
