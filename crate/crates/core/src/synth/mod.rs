//! Synthetic registration worlds with known ground truth, degraded
//! observations derived from them, and a brute-force oracle that computes
//! the expected analysis results directly from the truth.

mod emit;
mod oracle;

pub use emit::{emit_observations, observe_domain, EmittedFiles, NoiseModel};
pub use oracle::{oracle_evaluate, ExpectedInterval, ExpectedVerdict, OracleOutput, VerdictKey};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::day::DayDate;
use crate::error::{Error, Result};

/// Longest run of renewals a single registration can have.
const MAX_RENEWAL_YEARS: i32 = 40;
const TLDS: [&str; 3] = ["com", "net", "org"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    pub domains: usize,
    pub window_start: DayDate,
    pub window_end: DayDate,
    /// First registrations may start this many days before the window.
    pub prewindow_days: i32,
    /// Chance a registration is not renewed at each anniversary.
    pub non_renewal_prob: f64,
    /// Share of registrations deleted within the add grace period.
    pub tasting_fraction: f64,
    pub agp_days: i32,
    /// After an ending, chance the name is caught again within
    /// `dropcatch_max_gap` days.
    pub dropcatch_fraction: f64,
    pub dropcatch_max_gap: i32,
    /// After an ending that was not drop-caught, chance of a later
    /// re-registration with a gap in `rereg_min_gap..=rereg_max_gap`.
    pub reregistration_prob: f64,
    pub rereg_min_gap: i32,
    pub rereg_max_gap: i32,
    /// Chance a registration obtains certificates.
    pub cert_prob: f64,
    pub cert_validity_days: i32,
    pub cert_renewal_days: i32,
    pub revocation_prob: f64,
    /// Revocation chance for a certificate still valid when its name is
    /// registered again.
    pub rereg_revocation_prob: f64,
    /// Chance the last certificate of a registration is never served after
    /// the registration ends.
    pub never_served_prob: f64,
    pub max_serving_linger_days: i32,
    pub ens_prob: f64,
    pub gasless_prob: f64,
    pub maven_prob: f64,
    /// Chance a Maven publisher keeps publishing after losing the domain.
    pub maven_continue_prob: f64,
    pub maven_min_interval: i32,
    pub maven_max_interval: i32,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            domains: 1000,
            window_start: DayDate::from_ymd(2021, 1, 1).expect("valid date"),
            window_end: DayDate::from_ymd(2025, 12, 31).expect("valid date"),
            prewindow_days: 1500,
            non_renewal_prob: 0.3,
            tasting_fraction: 0.1,
            agp_days: 5,
            dropcatch_fraction: 0.15,
            dropcatch_max_gap: 80,
            reregistration_prob: 0.35,
            rereg_min_gap: 80,
            rereg_max_gap: 600,
            cert_prob: 0.6,
            cert_validity_days: 90,
            cert_renewal_days: 60,
            revocation_prob: 0.02,
            rereg_revocation_prob: 0.25,
            never_served_prob: 0.25,
            max_serving_linger_days: 90,
            ens_prob: 0.12,
            gasless_prob: 0.05,
            maven_prob: 0.12,
            maven_continue_prob: 0.2,
            maven_min_interval: 30,
            maven_max_interval: 400,
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::DegenerateWorld(m));
        if self.domains == 0 {
            return bad("world needs at least one domain".into());
        }
        if self.window_start > self.window_end {
            return bad("window_start is after window_end".into());
        }
        let probs = [
            ("non_renewal_prob", self.non_renewal_prob),
            ("tasting_fraction", self.tasting_fraction),
            ("dropcatch_fraction", self.dropcatch_fraction),
            ("reregistration_prob", self.reregistration_prob),
            ("cert_prob", self.cert_prob),
            ("revocation_prob", self.revocation_prob),
            ("rereg_revocation_prob", self.rereg_revocation_prob),
            ("never_served_prob", self.never_served_prob),
            ("ens_prob", self.ens_prob),
            ("gasless_prob", self.gasless_prob),
            ("maven_prob", self.maven_prob),
            ("maven_continue_prob", self.maven_continue_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        let ranges = [
            ("prewindow_days", 0, self.prewindow_days),
            ("agp_days", 1, self.agp_days),
            ("dropcatch_max_gap", 1, self.dropcatch_max_gap),
            ("rereg_min_gap", 1, self.rereg_min_gap),
            ("rereg_max_gap", self.rereg_min_gap.max(1), self.rereg_max_gap),
            ("cert_validity_days", 2, self.cert_validity_days),
            ("cert_renewal_days", 1, self.cert_renewal_days),
            ("max_serving_linger_days", 0, self.max_serving_linger_days),
            ("maven_min_interval", 1, self.maven_min_interval),
            ("maven_max_interval", self.maven_min_interval.max(1), self.maven_max_interval),
        ];
        for (name, min, v) in ranges {
            if v < min {
                return bad(format!("{name} must be at least {min}, got {v}"));
            }
        }
        Ok(())
    }

    pub fn window(&self) -> crate::epoch::ObservationWindow {
        crate::epoch::ObservationWindow { first: self.window_start, last: self.window_end }
    }
}

/// A true registration, inclusive on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueEpoch {
    pub start: DayDate,
    pub end: DayDate,
}

impl TrueEpoch {
    pub fn len_days(&self) -> i32 {
        self.end.days_since(self.start) + 1
    }

    pub fn contains(&self, day: DayDate) -> bool {
        self.start <= day && day <= self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueCertificate {
    pub fqdn: String,
    pub fingerprint: String,
    pub not_before: DayDate,
    pub not_after: DayDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revoked: Option<DayDate>,
    /// Inclusive range of days a server presented the certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub served: Option<(DayDate, DayDate)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueEnsClaim {
    pub block_time: DayDate,
    pub wallet: String,
    pub txn: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueTxt {
    pub observed: DayDate,
    pub txt_value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueMavenNamespace {
    pub namespace: String,
    /// `(version, publish day)` in publish order.
    pub versions: Vec<(String, DayDate)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTruth {
    pub domain: String,
    /// Registrations that overlap the window, in order.
    pub epochs: Vec<TrueEpoch>,
    #[serde(default)]
    pub certificates: Vec<TrueCertificate>,
    #[serde(default)]
    pub ens_claims: Vec<TrueEnsClaim>,
    #[serde(default)]
    pub txt_records: Vec<TrueTxt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maven: Option<TrueMavenNamespace>,
}

impl DomainTruth {
    pub fn epoch_containing(&self, day: DayDate) -> Option<usize> {
        self.epochs.iter().position(|e| e.contains(day))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthWorld {
    pub params: WorldParams,
    pub seed: u64,
    pub domains: Vec<DomainTruth>,
}

/// Produces domains one at a time from a single seeded stream.
pub struct WorldGenerator {
    params: WorldParams,
    rng: ChaCha8Rng,
    next: usize,
}

impl WorldGenerator {
    pub fn new(params: WorldParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(WorldGenerator { params, rng: ChaCha8Rng::seed_from_u64(seed), next: 0 })
    }

    fn epoch_len(&mut self) -> i32 {
        let p = &self.params;
        if self.rng.gen_bool(p.tasting_fraction) {
            return self.rng.gen_range(1..=p.agp_days);
        }
        let mut years = 1;
        while years < MAX_RENEWAL_YEARS && !self.rng.gen_bool(p.non_renewal_prob) {
            years += 1;
        }
        365 * years
    }

    fn epochs(&mut self) -> Vec<TrueEpoch> {
        let (wf, wl) = (self.params.window_start, self.params.window_end);
        loop {
            let span = wl.days_since(wf) + self.params.prewindow_days;
            let mut start = wf - self.params.prewindow_days + self.rng.gen_range(0..=span);
            let mut out = Vec::new();
            while start <= wl {
                let end = start + (self.epoch_len() - 1);
                if end >= wf {
                    out.push(TrueEpoch { start, end });
                }
                if end >= wl {
                    break;
                }
                let p = &self.params;
                let gap = if self.rng.gen_bool(p.dropcatch_fraction) {
                    self.rng.gen_range(1..=p.dropcatch_max_gap)
                } else if self.rng.gen_bool(p.reregistration_prob) {
                    self.rng.gen_range(p.rereg_min_gap..=p.rereg_max_gap)
                } else {
                    break;
                };
                start = end + gap + 1;
            }
            if !out.is_empty() {
                return out;
            }
        }
    }

    fn hex(&mut self, nibbles: usize) -> String {
        let mut s = String::with_capacity(nibbles + 2);
        s.push_str("0x");
        while s.len() < nibbles + 2 {
            s.push_str(&format!("{:016x}", self.rng.gen::<u64>()));
        }
        s.truncate(nibbles + 2);
        s
    }

    fn certificates(&mut self, idx: usize, domain: &str, epochs: &[TrueEpoch]) -> Vec<TrueCertificate> {
        let wl = self.params.window_end;
        let mut out = Vec::new();
        for (k, e) in epochs.iter().enumerate() {
            if !self.rng.gen_bool(self.params.cert_prob) {
                continue;
            }
            let next_start = epochs.get(k + 1).map(|n| n.start);
            let fqdn = if self.rng.gen_bool(0.5) { domain.to_string() } else { format!("www.{domain}") };
            let mut nb = e.start + self.rng.gen_range(0..=(e.len_days() - 1).min(3));
            let first = out.len();
            while nb <= e.end && nb <= wl {
                let na = nb + self.params.cert_validity_days;
                out.push(TrueCertificate {
                    fqdn: fqdn.clone(),
                    fingerprint: format!("{idx:07x}{:05x}", out.len()),
                    not_before: nb,
                    not_after: na,
                    revoked: None,
                    served: None,
                });
                nb = nb + self.params.cert_renewal_days;
            }
            for i in first..out.len() {
                let last = i + 1 == out.len();
                let (cnb, cna) = (out[i].not_before, out[i].not_after);
                let reregistered_while_valid = last && next_start.is_some_and(|s| s < cna);
                out[i].revoked = if reregistered_while_valid
                    && self.rng.gen_bool(self.params.rereg_revocation_prob)
                {
                    let s = next_start.expect("checked above");
                    Some(s + self.rng.gen_range(0..=10)).filter(|r| *r < cna)
                } else if self.rng.gen_bool(self.params.revocation_prob) {
                    Some(cnb + self.rng.gen_range(1..cna.days_since(cnb)))
                } else {
                    None
                };
                if last {
                    let linger = if self.rng.gen_bool(self.params.never_served_prob) {
                        0
                    } else {
                        self.rng.gen_range(1..=self.params.max_serving_linger_days.max(1))
                    };
                    let from = cnb.max(e.end - 5);
                    let death = out[i].revoked.unwrap_or(cna);
                    let until = (e.end + linger).min(death.pred());
                    out[i].served = (from <= until).then_some((from, until));
                }
            }
        }
        out
    }

    fn domain(&mut self) -> DomainTruth {
        let idx = self.next;
        self.next += 1;
        let tld = TLDS[self.rng.gen_range(0..TLDS.len())];
        let domain = format!("d{idx:07}.{tld}");
        let epochs = self.epochs();
        let certificates = self.certificates(idx, &domain, &epochs);
        let wl = self.params.window_end;

        let mut ens_claims = Vec::new();
        let mut txt_records = Vec::new();
        for e in &epochs {
            let latest = e.end.min(wl);
            if self.rng.gen_bool(self.params.ens_prob) {
                let day = e.start + self.rng.gen_range(0..=latest.days_since(e.start));
                let wallet = self.hex(40);
                let txn = self.hex(64);
                ens_claims.push(TrueEnsClaim { block_time: day, wallet, txn });
            }
            if self.rng.gen_bool(self.params.gasless_prob) {
                let day = e.start + self.rng.gen_range(0..=latest.days_since(e.start));
                let txt_value = format!("ENS1 {}", self.hex(40));
                txt_records.push(TrueTxt { observed: day, txt_value });
                txt_records.push(TrueTxt { observed: day, txt_value: "v=spf1 -all".into() });
            }
        }

        let maven = if self.rng.gen_bool(self.params.maven_prob) {
            let e = epochs[0];
            let latest = e.end.min(wl);
            let mut day = e.start + self.rng.gen_range(0..=latest.days_since(e.start).min(180));
            let until = if self.rng.gen_bool(self.params.maven_continue_prob) { wl } else { latest };
            let mut versions = Vec::new();
            while day <= until {
                versions.push((format!("1.0.{}", versions.len()), day));
                day = day + self.rng.gen_range(self.params.maven_min_interval..=self.params.maven_max_interval);
            }
            let (label, tld) = domain.split_once('.').expect("generated names have a dot");
            Some(TrueMavenNamespace { namespace: format!("{tld}.{label}"), versions })
        } else {
            None
        };

        DomainTruth { domain, epochs, certificates, ens_claims, txt_records, maven }
    }
}

impl Iterator for WorldGenerator {
    type Item = DomainTruth;

    fn next(&mut self) -> Option<DomainTruth> {
        (self.next < self.params.domains).then(|| self.domain())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.params.domains - self.next;
        (n, Some(n))
    }
}

pub fn generate_world(params: &WorldParams, seed: u64) -> Result<GroundTruthWorld> {
    let domains = WorldGenerator::new(params.clone(), seed)?.collect();
    Ok(GroundTruthWorld { params: params.clone(), seed, domains })
}
