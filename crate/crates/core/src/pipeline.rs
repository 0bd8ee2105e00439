//! Glue between file formats and the analysis stages.

use std::collections::HashMap;
use std::io::Read;

use log::warn;

use crate::dataio::{DomainObservations, GroupedObservations, LinkageInput, ObservationSet};
use crate::day::DayDate;
use crate::epoch::{infer_epochs, EpochTimeline, ObservationWindow, ParamsByTld, RdapRecord};
use crate::error::{Error, Result};
use crate::linkage::{
    linkages_from_certificates, linkages_from_ens_claims, linkages_from_maven_index,
    match_gasless_txt, Linkage,
};
use crate::suffix::SuffixRules;

/// RDAP records grouped by lowercase domain.
pub fn group_rdap(records: Vec<RdapRecord>) -> HashMap<String, Vec<RdapRecord>> {
    let mut out: HashMap<String, Vec<RdapRecord>> = HashMap::new();
    for r in records {
        out.entry(r.domain.to_ascii_lowercase()).or_default().push(r);
    }
    out
}

/// Span of all observed days.
pub fn observed_window(obs: &ObservationSet) -> Option<ObservationWindow> {
    let first = obs.values().filter_map(DomainObservations::first_day).min()?;
    let last = obs.values().filter_map(DomainObservations::last_day).max()?;
    Some(ObservationWindow { first, last })
}

pub fn infer_domain(
    domain: &str,
    obs: &DomainObservations,
    rdap: &HashMap<String, Vec<RdapRecord>>,
    params: &ParamsByTld,
    window: ObservationWindow,
) -> Result<EpochTimeline> {
    let records = rdap.get(domain).map(Vec::as_slice).unwrap_or(&[]);
    infer_epochs(
        domain,
        &obs.zone_days(),
        &obs.scan_days(),
        records,
        &params.for_domain(domain),
        window,
    )
}

/// Infers a timeline for every observed domain, in domain order. Domains
/// that fail are logged and left out.
pub fn infer_all(
    obs: &ObservationSet,
    rdap: &HashMap<String, Vec<RdapRecord>>,
    params: &ParamsByTld,
    window: ObservationWindow,
) -> Result<Vec<EpochTimeline>> {
    params.validate()?;
    let mut out = Vec::with_capacity(obs.len());
    for (domain, o) in obs {
        match infer_domain(domain, o, rdap, params, window) {
            Ok(tl) => out.push(tl),
            Err(e) => warn!("{domain}: {e}; no timeline"),
        }
    }
    Ok(out)
}

/// Streams domain groups through inference, handing each timeline to
/// `sink` as soon as it is built. Returns the number of domains seen.
pub fn infer_streaming<R: Read>(
    groups: GroupedObservations<R>,
    rdap: &HashMap<String, Vec<RdapRecord>>,
    params: &ParamsByTld,
    window: ObservationWindow,
    mut sink: impl FnMut(EpochTimeline) -> Result<()>,
) -> Result<usize> {
    params.validate()?;
    let mut n = 0;
    for group in groups {
        let (domain, o) = group?;
        n += 1;
        match infer_domain(&domain, &o, rdap, params, window) {
            Ok(tl) => sink(tl)?,
            Err(e) => warn!("{domain}: {e}; no timeline"),
        }
    }
    Ok(n)
}

pub fn timelines_by_domain(timelines: Vec<EpochTimeline>) -> HashMap<String, EpochTimeline> {
    timelines.into_iter().map(|t| (t.domain.clone(), t)).collect()
}

/// Runs the matching adapter for an ecosystem input.
pub fn linkages_from_input(input: &LinkageInput, rules: &SuffixRules, gasless_prefix: &str) -> Result<Vec<Linkage>> {
    Ok(match input {
        LinkageInput::Certificates(v) => linkages_from_certificates(v, rules),
        LinkageInput::EnsClaims(v) => linkages_from_ens_claims(v),
        LinkageInput::MavenVersions(v) => linkages_from_maven_index(v, rules),
        LinkageInput::GaslessTxt(v) => match_gasless_txt(v, gasless_prefix)?,
    })
}

/// The analysis date defaults to the last day of the window.
pub fn resolve_as_of(as_of: Option<DayDate>, window: ObservationWindow) -> Result<DayDate> {
    let day = as_of.unwrap_or(window.last);
    if day < window.first {
        return Err(Error::InvalidParams(format!("as-of date {day} precedes the observation window")));
    }
    Ok(day)
}
