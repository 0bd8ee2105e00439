//! Optional RDAP lookup client with an on-disk response cache.
//!
//! Requests go out one at a time, spaced at least `min_interval` apart per
//! server. HTTP 429 responses are retried with backoff (honoring a numeric
//! `Retry-After`) until the retry budget runs out, after which the domain is
//! reported as throttled.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::thread::sleep;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::day::DayDate;
use crate::epoch::RdapRecord;
use crate::error::{Error, Result};

pub const CACHE_DIR_ENV: &str = "DNSZOMBIE_CACHE_DIR";

/// RDAP base URLs keyed by TLD (or longer suffix).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoints(pub BTreeMap<String, String>);

#[derive(Deserialize)]
struct Bootstrap {
    services: Vec<(Vec<String>, Vec<String>)>,
}

impl Endpoints {
    /// Parses the IANA RDAP bootstrap registry format
    /// (`{"services": [[["com", "net"], ["https://..."]], ...]}`).
    pub fn from_bootstrap(json: &str) -> Result<Self> {
        let b: Bootstrap = serde_json::from_str(json)?;
        let mut map = BTreeMap::new();
        for (tlds, urls) in b.services {
            let Some(url) = urls.iter().find(|u| u.starts_with("https://")).or(urls.first()) else {
                continue;
            };
            for tld in tlds {
                map.insert(tld.to_ascii_lowercase(), url.clone());
            }
        }
        Ok(Endpoints(map))
    }

    pub fn insert(&mut self, suffix: &str, base_url: &str) {
        self.0.insert(suffix.to_ascii_lowercase(), base_url.to_string());
    }

    /// Base URL serving `domain`; the longest matching suffix wins.
    pub fn for_domain(&self, domain: &str) -> Option<&str> {
        let mut rest = domain;
        loop {
            if let Some(url) = self.0.get(rest) {
                if rest != domain {
                    return Some(url);
                }
            }
            rest = rest.split_once('.')?.1;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FetchConfig {
    pub min_interval: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
    /// When false only cached responses are used.
    pub allow_network: bool,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            min_interval: Duration::from_millis(500),
            max_retries: 4,
            backoff_base: Duration::from_secs(2),
            max_backoff: Duration::from_secs(120),
            timeout: Duration::from_secs(30),
            allow_network: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct CachedResponse {
    query_time: DayDate,
    status: u16,
    body: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FetchOutcome {
    pub records: Vec<RdapRecord>,
    /// No endpoint known for the domain's TLD.
    pub skipped: Vec<String>,
    /// Retry budget exhausted on rate limiting.
    pub throttled: Vec<String>,
    /// Not cached and network access disabled.
    pub uncached: Vec<String>,
    pub failed: Vec<(String, String)>,
    pub network_calls: usize,
}

impl FetchOutcome {
    pub fn is_partial(&self) -> bool {
        !(self.throttled.is_empty() && self.uncached.is_empty() && self.failed.is_empty())
    }
}

pub struct RdapFetcher {
    endpoints: Endpoints,
    cache_dir: PathBuf,
    config: FetchConfig,
    agent: ureq::Agent,
    last_call: HashMap<String, Instant>,
}

fn valid_cache_key(domain: &str) -> bool {
    !domain.is_empty()
        && !domain.starts_with('.')
        && domain
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' || b == b'.')
}

/// Turns a stored response into a record; `None` for responses that carry
/// no registration state (server errors).
fn to_record(domain: &str, resp: &CachedResponse) -> Option<RdapRecord> {
    match resp.status {
        404 => Some(RdapRecord::negative(domain, resp.query_time)),
        200 => {
            let json: serde_json::Value = serde_json::from_str(&resp.body).ok()?;
            let registered = json
                .get("events")
                .and_then(|e| e.as_array())
                .into_iter()
                .flatten()
                .find(|e| e.get("eventAction").and_then(|a| a.as_str()) == Some("registration"))
                .and_then(|e| e.get("eventDate")?.as_str()?.parse::<DayDate>().ok());
            let mut rec = RdapRecord::negative(domain, resp.query_time);
            rec.polarity = crate::epoch::RdapPolarity::Positive;
            rec.registration_date = registered;
            Some(rec)
        }
        _ => None,
    }
}

impl RdapFetcher {
    pub fn new(endpoints: Endpoints, cache_dir: &Path, config: FetchConfig) -> Result<Self> {
        std::fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Ok(RdapFetcher {
            endpoints,
            cache_dir: cache_dir.to_path_buf(),
            config,
            agent,
            last_call: HashMap::new(),
        })
    }

    fn cache_path(&self, domain: &str) -> PathBuf {
        self.cache_dir.join(format!("{domain}.json"))
    }

    fn read_cache(&self, domain: &str) -> Option<CachedResponse> {
        let text = std::fs::read_to_string(self.cache_path(domain)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Write-then-rename so readers never see a partial file.
    fn write_cache(&self, domain: &str, resp: &CachedResponse) -> Result<()> {
        let path = self.cache_path(domain);
        let tmp = self
            .cache_dir
            .join(format!(".{domain}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec(resp)?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn pace(&mut self, base: &str) {
        if let Some(last) = self.last_call.get(base) {
            let since = last.elapsed();
            if since < self.config.min_interval {
                sleep(self.config.min_interval - since);
            }
        }
        self.last_call.insert(base.to_string(), Instant::now());
    }

    /// `Ok(None)` when throttled beyond the retry budget.
    fn request(&mut self, base: &str, domain: &str, out: &mut FetchOutcome) -> std::result::Result<Option<(u16, String)>, String> {
        let url = format!("{}/domain/{domain}", base.trim_end_matches('/'));
        for attempt in 0..=self.config.max_retries {
            self.pace(base);
            out.network_calls += 1;
            let mut resp = self
                .agent
                .get(&url)
                .header("Accept", "application/rdap+json")
                .call()
                .map_err(|e| e.to_string())?;
            let status = resp.status().as_u16();
            if status == 429 {
                let hinted = resp
                    .headers()
                    .get("retry-after")
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .map(Duration::from_secs);
                let wait = hinted
                    .unwrap_or(self.config.backoff_base * 2u32.saturating_pow(attempt))
                    .min(self.config.max_backoff);
                debug!("{domain}: throttled, retrying in {wait:?}");
                if attempt < self.config.max_retries {
                    sleep(wait);
                }
                continue;
            }
            let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
            return Ok(Some((status, body)));
        }
        Ok(None)
    }

    /// Looks up each domain, consulting the cache first. Fresh responses are
    /// stamped with `query_time`.
    pub fn fetch(&mut self, domains: &[String], query_time: DayDate) -> Result<FetchOutcome> {
        let mut out = FetchOutcome::default();
        for domain in domains {
            let domain = domain.trim().trim_end_matches('.').to_ascii_lowercase();
            if !valid_cache_key(&domain) {
                warn!("`{domain}` is not a plain DNS name; skipped");
                out.skipped.push(domain);
                continue;
            }
            let cached = self.read_cache(&domain);
            let resp = match cached {
                Some(c) => c,
                None => {
                    let Some(base) = self.endpoints.for_domain(&domain).map(str::to_string) else {
                        warn!("no RDAP endpoint for `{domain}`; skipped");
                        out.skipped.push(domain);
                        continue;
                    };
                    if !self.config.allow_network {
                        out.uncached.push(domain);
                        continue;
                    }
                    match self.request(&base, &domain, &mut out) {
                        Ok(Some((status, body))) => {
                            let c = CachedResponse { query_time, status, body };
                            if status == 200 || status == 404 {
                                self.write_cache(&domain, &c)?;
                            }
                            c
                        }
                        Ok(None) => {
                            warn!("{domain}: still throttled after {} retries", self.config.max_retries);
                            out.throttled.push(domain);
                            continue;
                        }
                        Err(e) => {
                            warn!("{domain}: {e}");
                            out.failed.push((domain, e));
                            continue;
                        }
                    }
                }
            };
            match to_record(&domain, &resp) {
                Some(r) => out.records.push(r),
                None => out.failed.push((domain, format!("HTTP {}", resp.status))),
            }
        }
        Ok(out)
    }
}
